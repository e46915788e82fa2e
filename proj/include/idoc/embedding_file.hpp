#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace idoc {

/// In-memory image of the little-endian embedding file:
///
///   magic "IDOCEMB1" | u16 len + encoder_id | u32 dim | u64 count |
///   count x (u16 len + id | dim x f32)
///
/// Vectors are stored record-major in `data` (count x dim).
struct EmbeddingFile {
    std::string encoder_id;
    std::uint32_t dim = 0;
    std::vector<std::string> ids;
    std::vector<float> data;

    std::size_t count() const noexcept { return ids.size(); }
    std::span<const float> vector(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

inline constexpr char kEmbeddingMagic[8] = {'I', 'D', 'O', 'C', 'E', 'M', 'B', '1'};

/// Serialized bytes; deterministic for a given input.
std::vector<unsigned char> encode_embedding_file(const EmbeddingFile& file);

/// Parses and validates: magic, declared dim (when given), truncation,
/// trailing bytes, duplicate or oversized ids, non-finite components and
/// norms outside 1 +- 1e-3. Vectors whose norm is off by more than 1e-6 are
/// re-normalized; others are kept bit-exact.
EmbeddingFile decode_embedding_file(std::span<const unsigned char> bytes, const std::string& source,
                                    std::optional<std::uint32_t> expected_dim = std::nullopt);

/// Writes through a temporary file and a rename, so the target is either
/// complete or absent.
void write_embedding_file(const std::filesystem::path& path, const EmbeddingFile& file);
EmbeddingFile read_embedding_file(const std::filesystem::path& path,
                                  std::optional<std::uint32_t> expected_dim = std::nullopt);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace idoc
