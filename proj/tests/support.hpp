#pragma once

#include <cstdint>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "idoc/geometry.hpp"

namespace idoc::testing {

/// splitmix64: tiny, seedable, identical on every platform.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    int integer(int lo, int hi)  // inclusive
    {
        return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double real(double lo, double hi)
    {
        return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }

    BBox box(int extent = 200, int max_side = 80)
    {
        return BBox{integer(-extent / 4, extent), integer(-extent / 4, extent), integer(1, max_side),
                    integer(1, max_side)};
    }

    std::vector<float> unit_vector(std::size_t dim)
    {
        std::vector<double> raw(dim);
        double n2 = 0.0;
        for (double& v : raw) {
            v = real(-1.0, 1.0);
            n2 += v * v;
        }
        std::vector<float> out(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            out[i] = static_cast<float>(raw[i] / std::sqrt(n2));
        }
        return out;
    }

private:
    std::uint64_t state_;
};

class TempDir {
public:
    TempDir()
    {
        std::string pattern = (std::filesystem::temp_directory_path() / "idoc-test-XXXXXX").string();
        if (mkdtemp(pattern.data()) == nullptr) {
            throw std::runtime_error("mkdtemp failed");
        }
        path_ = pattern;
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& file, const std::string& text)
{
    std::ofstream out(file, std::ios::binary);
    out << text;
}

}  // namespace idoc::testing
