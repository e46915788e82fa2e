#include "idoc/checksum.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#include <zlib.h>

#include "idoc/error.hpp"

namespace idoc {

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed)
{
    uLong crc = seed;
    // zlib takes uInt lengths; feed in bounded chunks.
    constexpr std::size_t chunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += chunk) {
        const std::size_t len = std::min(chunk, bytes.size() - off);
        crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(len));
    }
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_file(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw_data_error("cannot open " + file.string());
    }
    std::array<unsigned char, 1 << 16> buffer{};
    std::uint32_t crc = 0;
    while (in) {
        in.read(reinterpret_cast<char*>(buffer.data()), buffer.size());
        const auto got = static_cast<std::size_t>(in.gcount());
        crc = crc32(std::span(buffer.data(), got), crc);
    }
    return crc;
}

std::string hex32(std::uint32_t value)
{
    char text[9];
    std::snprintf(text, sizeof text, "%08x", value);
    return text;
}

}  // namespace idoc
