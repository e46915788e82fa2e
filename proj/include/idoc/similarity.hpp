#pragma once

#include <cstddef>
#include <span>

namespace idoc {

/// Dot product with float components widened to double and accumulated in
/// index order. Products of two floats are exact in double, so every routine
/// below that follows the same accumulation order produces identical bits.
double dot(std::span<const float> a, std::span<const float> b) noexcept;

/// out[i] = dot(query, vector i) for a dimension-major matrix, i.e. row d
/// holds component d of all `count` vectors. Vectorized across vectors,
/// sequential across dimensions, so results match dot() bit for bit.
void scan_similarities(std::span<const float> matrix, std::size_t count, std::span<const float> query,
                       std::span<double> out) noexcept;

}  // namespace idoc
