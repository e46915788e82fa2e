#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "idoc/dense.hpp"

namespace idoc {

enum class BenchMode { sparse, dense, both };

const char* to_string(BenchMode mode);
BenchMode bench_mode_from_string(const std::string& name);

/// Synthetic cost profile: random unit vectors stand in for region and
/// cell embeddings, so only matching cost is measured.
struct BenchConfig {
    BenchMode mode = BenchMode::both;
    std::size_t pages = docexplore_profile::kPages;
    std::size_t queries = docexplore_profile::kQueries;
    std::size_t regions_per_page = docexplore_profile::kRegionsPerPage;
    std::uint32_t dim = docexplore_profile::kDim;
    int page_width = docexplore_profile::kPageWidth;
    int page_height = docexplore_profile::kPageHeight;
    int stride = docexplore_profile::kStride;
    int query_grid_w = 1;
    int query_grid_h = 1;
    // A dense map of a full page holds ~68 MB at dim 768, so the dense
    // matcher runs on this many pages x queries and is scaled up.
    std::size_t dense_sample_pages = 1;
    std::size_t dense_sample_queries = 1;
    std::size_t top_k = 1000;
    std::uint64_t seed = 7;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

struct BenchRow {
    std::string mode;
    std::size_t pages = 0;
    std::size_t queries = 0;
    std::uint64_t comparisons = 0;  // vector comparisons over the full profile
    double wall_ms = 0.0;
    double per_query_ms = 0.0;
    std::uint64_t placements_per_page = 0;
    std::uint64_t comparisons_per_page = 0;
    std::size_t measured_pages = 0;
    std::size_t measured_queries = 0;
    bool extrapolated = false;
};

struct BenchReport {
    BenchConfig config;
    std::vector<BenchRow> rows;
    std::uint64_t dense_placements_per_page = 0;
    double placement_ratio = 0.0;  // dense placements / sparse regions, per page
    std::optional<CostReport> costs;
    std::uint64_t dense_counted_sample = 0;
    std::uint64_t dense_closed_form_sample = 0;

    /// Cost figures only; identical for identical configs.
    nlohmann::ordered_json counts_json() const;
    nlohmann::ordered_json to_json() const;
    std::string csv() const;
};

/// `count` unit vectors of `dim` components, record-major. Components are
/// drawn from raw mt19937_64 output so the stream is portable.
std::vector<float> random_unit_vectors(std::uint64_t seed, std::size_t count, std::uint32_t dim);

BenchReport run_bench(const BenchConfig& config, unsigned threads = 1);

}  // namespace idoc
