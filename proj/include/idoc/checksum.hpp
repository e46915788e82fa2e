#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace idoc {

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed = 0);
std::uint32_t crc32_file(const std::filesystem::path& file);
std::string hex32(std::uint32_t value);

}  // namespace idoc
