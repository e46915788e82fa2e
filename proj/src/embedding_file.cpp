#include "idoc/embedding_file.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "idoc/error.hpp"
#include "idoc/similarity.hpp"

namespace fs = std::filesystem;

namespace idoc {

namespace {

constexpr double kLoadTolerance = 1e-3;
constexpr double kNormTolerance = 1e-6;

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const unsigned char*>(p);
        out_.insert(out_.end(), b, b + n);
    }

    template <typename T>
    void little(T value)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xff));
        }
    }

    void text(const std::string& s, const char* what)
    {
        if (s.size() > 0xffff) {
            throw_data_error(std::string(what) + " longer than 65535 bytes");
        }
        little<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }

    std::vector<unsigned char> take() { return std::move(out_); }

private:
    std::vector<unsigned char> out_;
};

class Reader {
public:
    Reader(std::span<const unsigned char> bytes, const std::string& source) : bytes_(bytes), source_(source) {}

    bool has(std::size_t n) const noexcept { return bytes_.size() - pos_ >= n; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void need(std::size_t n, const std::string& what) const
    {
        if (!has(n)) {
            throw_data_error(source_ + ": truncated file while reading " + what);
        }
    }

    template <typename T>
    T little(const std::string& what)
    {
        need(sizeof(T), what);
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string text(const std::string& what)
    {
        const auto len = little<std::uint16_t>(what);
        need(len, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }

    std::span<const unsigned char> raw(std::size_t n, const std::string& what)
    {
        need(n, what);
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

private:
    std::span<const unsigned char> bytes_;
    const std::string& source_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_embedding_file(const EmbeddingFile& file)
{
    if (file.data.size() != file.ids.size() * std::size_t{file.dim}) {
        throw Error(ErrorKind::internal, "embedding data size does not match count x dim");
    }
    Writer w;
    w.bytes(kEmbeddingMagic, sizeof kEmbeddingMagic);
    w.text(file.encoder_id, "encoder_id");
    w.little<std::uint32_t>(file.dim);
    w.little<std::uint64_t>(file.ids.size());
    for (std::size_t i = 0; i < file.ids.size(); ++i) {
        w.text(file.ids[i], "embedding id");
        for (float v : file.vector(i)) {
            w.little<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
        }
    }
    return w.take();
}

EmbeddingFile decode_embedding_file(std::span<const unsigned char> bytes, const std::string& source,
                                    std::optional<std::uint32_t> expected_dim)
{
    Reader r(bytes, source);
    const auto magic = r.raw(sizeof kEmbeddingMagic, "magic");
    if (std::memcmp(magic.data(), kEmbeddingMagic, sizeof kEmbeddingMagic) != 0) {
        throw_data_error(source + ": bad magic '" + std::string(reinterpret_cast<const char*>(magic.data()), 8) +
                         "', expected 'IDOCEMB1'");
    }

    EmbeddingFile file;
    file.encoder_id = r.text("encoder_id");
    file.dim = r.little<std::uint32_t>("dim");
    const auto count = r.little<std::uint64_t>("count");
    if (file.dim == 0) {
        throw_data_error(source + ": dim must be positive");
    }
    if (expected_dim && *expected_dim != file.dim) {
        throw_data_error(source + ": dim mismatch, expected " + std::to_string(*expected_dim) + " but file has " +
                         std::to_string(file.dim));
    }
    // Each record needs at least its id length and vector.
    const std::size_t min_record = 2 + std::size_t{file.dim} * 4;
    if (count > r.remaining() / min_record) {
        throw_data_error(source + ": truncated file, header declares " + std::to_string(count) +
                         " records but the data holds at most " + std::to_string(r.remaining() / min_record));
    }

    file.ids.reserve(count);
    file.data.resize(count * file.dim);
    std::unordered_set<std::string> seen;
    seen.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string id = r.text("record " + std::to_string(i) + " id");
        if (!seen.insert(id).second) {
            throw_data_error(source + ": duplicate id '" + id + "'");
        }
        const auto raw = r.raw(std::size_t{file.dim} * 4, "record '" + id + "'");
        float* vec = file.data.data() + i * file.dim;
        for (std::uint32_t d = 0; d < file.dim; ++d) {
            const std::uint32_t bits = std::uint32_t{raw[4 * d]} | std::uint32_t{raw[4 * d + 1]} << 8 |
                                       std::uint32_t{raw[4 * d + 2]} << 16 | std::uint32_t{raw[4 * d + 3]} << 24;
            vec[d] = std::bit_cast<float>(bits);
            if (!std::isfinite(vec[d])) {
                throw_data_error(source + ": non-finite component in record '" + id + "'");
            }
        }
        const std::span<const float> v(vec, file.dim);
        const double norm = std::sqrt(dot(v, v));
        if (!(std::abs(norm - 1.0) <= kLoadTolerance)) {
            throw_data_error(source + ": record '" + id + "' has norm " + std::to_string(norm) +
                             ", expected 1 +- 1e-3");
        }
        if (std::abs(norm - 1.0) > kNormTolerance) {
            for (std::uint32_t d = 0; d < file.dim; ++d) {
                vec[d] = static_cast<float>(vec[d] / norm);
            }
        }
        file.ids.push_back(std::move(id));
    }
    if (r.remaining() != 0) {
        throw_data_error(source + ": " + std::to_string(r.remaining()) + " trailing bytes after " +
                         std::to_string(count) + " records");
    }
    return file;
}

std::vector<unsigned char> read_file_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw_data_error("missing file: " + path.string());
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<unsigned char> bytes(size);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw_data_error("cannot read " + path.string());
    }
    return bytes;
}

void write_file_atomic(const fs::path& path, std::span<const unsigned char> bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw_data_error("cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw_data_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

void write_embedding_file(const fs::path& path, const EmbeddingFile& file)
{
    write_file_atomic(path, encode_embedding_file(file));
}

EmbeddingFile read_embedding_file(const fs::path& path, std::optional<std::uint32_t> expected_dim)
{
    const auto bytes = read_file_bytes(path);
    return decode_embedding_file(bytes, path.string(), expected_dim);
}

}  // namespace idoc
