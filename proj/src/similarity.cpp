#include "idoc/similarity.hpp"

#include <algorithm>
#include <array>

namespace idoc {

double dot(std::span<const float> a, std::span<const float> b) noexcept
{
    double sum = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return sum;
}

namespace {

constexpr std::size_t kBlock = 512;

__attribute__((target_clones("avx512f", "avx2", "default")))
void scan_block(const float* matrix, std::size_t stride, std::size_t width, const float* query, std::size_t dim,
                double* acc) noexcept
{
    std::fill(acc, acc + width, 0.0);
    for (std::size_t d = 0; d < dim; ++d) {
        const double q = query[d];
        const float* row = matrix + d * stride;
        for (std::size_t i = 0; i < width; ++i) {
            acc[i] += q * static_cast<double>(row[i]);
        }
    }
}

}  // namespace

void scan_similarities(std::span<const float> matrix, std::size_t count, std::span<const float> query,
                       std::span<double> out) noexcept
{
    const std::size_t dim = query.size();
    for (std::size_t start = 0; start < count; start += kBlock) {
        const std::size_t width = std::min(kBlock, count - start);
        scan_block(matrix.data() + start, count, width, query.data(), dim, out.data() + start);
    }
}

}  // namespace idoc
