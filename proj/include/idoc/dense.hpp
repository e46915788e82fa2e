#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "idoc/corpus.hpp"
#include "idoc/encoder.hpp"
#include "idoc/index.hpp"

namespace idoc {

// Dense feature-map correlation matcher. It scores every stride-aligned
// placement of a query feature map over every page feature map and exists
// to measure matching cost against the sparse index; correlation here is
// the mean cosine over aligned cells, not a reproduction of any published
// dense matcher's accuracy.

/// Cost-model constants of the DocExplore benchmark profile.
namespace docexplore_profile {
inline constexpr int kPageWidth = 602;
inline constexpr int kPageHeight = 920;
inline constexpr int kStride = 5;
inline constexpr int kPages = 1447;
inline constexpr int kQueries = 1447;
inline constexpr int kRegionsPerPage = 112;
inline constexpr int kDim = 768;
inline constexpr double kSparseBudgetMs = 720.0;
}  // namespace docexplore_profile

struct FeatureMap {
    std::string page_id;
    int width_px = 0;
    int height_px = 0;
    int grid_w = 0;
    int grid_h = 0;
    int stride = 1;
    std::uint32_t dim = 0;
    /// Dimension-major: component d of cell (i, j) sits at
    /// d * cell_count() + i * grid_w + j.
    std::vector<float> cells;

    std::size_t cell_count() const noexcept { return static_cast<std::size_t>(grid_w) * grid_h; }
    std::vector<float> cell(std::size_t c) const;
};

/// grid = floor(size / stride) per axis; cell (i, j) encodes the window of
/// side `window` (0 means `stride`) anchored at (j*stride, i*stride),
/// clipped to the image.
FeatureMap build_feature_map(const std::string& id, const cv::Mat& image, int stride, const EncoderSpec& spec,
                             int window = 0);
inline FeatureMap build_feature_map(const Page& page, int stride, const EncoderSpec& spec, int window = 0)
{
    return build_feature_map(page.page_id, page.image, stride, spec, window);
}

/// Packs record-major cell vectors (row-major cell order) into a map.
FeatureMap feature_map_from_vectors(std::string id, int grid_w, int grid_h, int stride, std::uint32_t dim,
                                    std::span<const float> record_major);

std::uint64_t placement_count(const FeatureMap& query, const FeatureMap& page) noexcept;

struct DenseCost {
    std::size_t pages = 0;
    std::size_t queries = 0;
    std::uint64_t placements = 0;
    std::uint64_t vector_comparisons = 0;   // closed form: sum of placements x query cells
    std::uint64_t counted_comparisons = 0;  // incremented inside the scoring loop
    double wall_ms = 0.0;
};

struct DenseResult {
    std::vector<RankedHit> hits;
    DenseCost cost;
};

/// Hits are placements turned back into pixel boxes of the query's size,
/// ranked by descending score, then page order, then row-major placement.
DenseResult dense_search(const FeatureMap& query, std::span<const FeatureMap> pages, std::size_t top_k);

struct CostRecord {
    std::string corpus_id;
    std::size_t pages = 0;
    std::size_t queries = 0;
    std::uint64_t placements = 0;
    std::uint64_t comparisons = 0;
    double wall_ms = 0.0;
};

struct CostReport {
    CostRecord sparse;
    CostRecord dense;
    double placement_ratio = 0.0;
    double comparison_ratio = 0.0;
    double wall_ratio = 0.0;
};

CostReport compare_costs(const CostRecord& sparse, const CostRecord& dense);

}  // namespace idoc
