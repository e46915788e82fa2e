#include "idoc/bench.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "idoc/error.hpp"
#include "idoc/index.hpp"
#include "idoc/version.hpp"

using nlohmann::ordered_json;

namespace idoc {

const char* to_string(BenchMode mode)
{
    switch (mode) {
    case BenchMode::sparse:
        return "sparse";
    case BenchMode::dense:
        return "dense";
    default:
        return "both";
    }
}

BenchMode bench_mode_from_string(const std::string& name)
{
    if (name == "sparse") {
        return BenchMode::sparse;
    }
    if (name == "dense") {
        return BenchMode::dense;
    }
    if (name == "both") {
        return BenchMode::both;
    }
    throw_usage_error("unknown bench mode '" + name + "' (sparse|dense|both)");
}

void BenchConfig::validate() const
{
    if (pages < 1 || queries < 1 || regions_per_page < 1 || dim < 1) {
        throw_usage_error("bench pages, queries, regions per page and dim must all be >= 1");
    }
    if (stride < 1 || stride > std::min(page_width, page_height)) {
        throw_usage_error("bench stride must lie in [1, min(page width, page height)]");
    }
    if (query_grid_w < 1 || query_grid_h < 1) {
        throw_usage_error("bench query grid must be at least 1x1");
    }
    if (dense_sample_pages < 1 || dense_sample_queries < 1) {
        throw_usage_error("dense sample sizes must be >= 1");
    }
    if (top_k < 1) {
        throw_usage_error("bench top_k must be >= 1");
    }
}

ordered_json BenchConfig::to_json() const
{
    return ordered_json{{"mode", to_string(mode)},
                        {"pages", pages},
                        {"queries", queries},
                        {"regions_per_page", regions_per_page},
                        {"dim", dim},
                        {"page_size", {page_width, page_height}},
                        {"stride", stride},
                        {"query_grid", {query_grid_w, query_grid_h}},
                        {"dense_sample_pages", dense_sample_pages},
                        {"dense_sample_queries", dense_sample_queries},
                        {"top_k", top_k},
                        {"seed", seed}};
}

std::vector<float> random_unit_vectors(std::uint64_t seed, std::size_t count, std::uint32_t dim)
{
    std::mt19937_64 engine(seed);
    std::vector<float> out(count * dim);
    std::vector<double> raw(dim);
    for (std::size_t i = 0; i < count; ++i) {
        double norm2 = 0.0;
        for (std::uint32_t d = 0; d < dim; ++d) {
            raw[d] = static_cast<double>(engine() >> 11) * 0x1.0p-52 - 1.0;
            norm2 += raw[d] * raw[d];
        }
        if (norm2 == 0.0) {
            raw[0] = 1.0;
            norm2 = 1.0;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::uint32_t d = 0; d < dim; ++d) {
            out[i * dim + d] = static_cast<float>(raw[d] * inv);
        }
    }
    return out;
}

namespace {

// Independent streams per role, so one mode's data does not depend on
// whether the other mode ran.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream)
{
    return seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
}

std::string page_name(std::size_t p)
{
    char text[32];
    std::snprintf(text, sizeof text, "page%06zu", p);
    return text;
}

std::string profile_id(const BenchConfig& c)
{
    return "bench:seed=" + std::to_string(c.seed) + ":pages=" + std::to_string(c.pages) +
           ":queries=" + std::to_string(c.queries) + ":dim=" + std::to_string(c.dim);
}

BenchRow run_sparse(const BenchConfig& c, unsigned threads)
{
    std::vector<Region> regions;
    regions.reserve(c.pages * c.regions_per_page);
    for (std::size_t p = 0; p < c.pages; ++p) {
        const std::string id = page_name(p);
        for (std::size_t r = 0; r < c.regions_per_page; ++r) {
            const int x = static_cast<int>(r % 8) * 64;
            const int y = static_cast<int>(r / 8 % 14) * 64;
            regions.push_back(Region{id, BBox{x, y, 60, 60}, 1.0, "synthetic"});
        }
    }

    IndexManifest manifest;
    manifest.format_version = kIndexFormatVersion;
    manifest.engine_version = kEngineVersion;
    manifest.encoder.kind = EncoderKind::external;
    manifest.encoder.external_id = "random-unit:d" + std::to_string(c.dim);
    manifest.encoder.external_dim = c.dim;
    manifest.corpus_id = profile_id(c);
    manifest.dim = c.dim;
    manifest.region_count = regions.size();

    std::optional<SearchIndex> index;
    {
        const std::vector<float> vectors = random_unit_vectors(stream_seed(c.seed, 0), regions.size(), c.dim);
        index.emplace(std::move(manifest), std::move(regions), vectors);
    }

    const std::vector<float> query_data = random_unit_vectors(stream_seed(c.seed, 1), c.queries, c.dim);
    std::vector<Embedding> queries(c.queries);
    for (std::size_t q = 0; q < c.queries; ++q) {
        queries[q].encoder_id = index->encoder_id();
        queries[q].vector.assign(query_data.begin() + static_cast<std::ptrdiff_t>(q * c.dim),
                                 query_data.begin() + static_cast<std::ptrdiff_t>((q + 1) * c.dim));
    }

    SearchOptions options;
    options.top_k = c.top_k;
    const BatchResult batch = search_batch(*index, queries, options, threads);

    BenchRow row;
    row.mode = "sparse";
    row.pages = c.pages;
    row.queries = c.queries;
    row.comparisons = batch.timing.comparisons;
    row.wall_ms = batch.timing.total_ms;
    row.per_query_ms = batch.timing.mean_ms;
    row.placements_per_page = c.regions_per_page;
    row.comparisons_per_page = c.regions_per_page;
    row.measured_pages = c.pages;
    row.measured_queries = c.queries;
    return row;
}

struct DenseOutcome {
    BenchRow row;
    std::uint64_t counted = 0;
    std::uint64_t closed_form = 0;
};

DenseOutcome run_dense(const BenchConfig& c, std::uint64_t placements_per_page)
{
    const int grid_w = c.page_width / c.stride;
    const int grid_h = c.page_height / c.stride;
    const std::size_t cells = static_cast<std::size_t>(grid_w) * grid_h;
    const std::size_t sample_pages = std::min(c.dense_sample_pages, c.pages);
    const std::size_t sample_queries = std::min(c.dense_sample_queries, c.queries);

    std::vector<FeatureMap> maps;
    for (std::size_t p = 0; p < sample_pages; ++p) {
        const std::vector<float> v = random_unit_vectors(stream_seed(c.seed, 2 + p), cells, c.dim);
        FeatureMap map = feature_map_from_vectors(page_name(p), grid_w, grid_h, c.stride, c.dim, v);
        map.width_px = c.page_width;
        map.height_px = c.page_height;
        maps.push_back(std::move(map));
    }

    const std::size_t query_cells = static_cast<std::size_t>(c.query_grid_w) * c.query_grid_h;
    DenseOutcome out;
    double wall = 0.0;
    for (std::size_t q = 0; q < sample_queries; ++q) {
        const std::vector<float> v =
            random_unit_vectors(stream_seed(c.seed, 1000000 + q), query_cells, c.dim);
        const FeatureMap query = feature_map_from_vectors("query" + std::to_string(q), c.query_grid_w,
                                                          c.query_grid_h, c.stride, c.dim, v);
        const DenseResult result = dense_search(query, maps, c.top_k);
        wall += result.cost.wall_ms;
        out.counted += result.cost.counted_comparisons;
        out.closed_form += result.cost.vector_comparisons;
    }

    const double per_pair_ms = wall / static_cast<double>(sample_pages * sample_queries);
    BenchRow& row = out.row;
    row.mode = "dense";
    row.pages = c.pages;
    row.queries = c.queries;
    row.placements_per_page = placements_per_page;
    row.comparisons_per_page = placements_per_page * query_cells;
    row.comparisons = row.comparisons_per_page * c.pages * c.queries;
    row.per_query_ms = per_pair_ms * static_cast<double>(c.pages);
    row.wall_ms = row.per_query_ms * static_cast<double>(c.queries);
    row.measured_pages = sample_pages;
    row.measured_queries = sample_queries;
    row.extrapolated = sample_pages < c.pages || sample_queries < c.queries;
    return out;
}

CostRecord to_record(const BenchRow& row, const std::string& corpus_id)
{
    return CostRecord{corpus_id,
                      row.pages,
                      row.queries,
                      row.placements_per_page * row.pages * row.queries,
                      row.comparisons,
                      row.wall_ms};
}

std::string format_ms(double v)
{
    char text[32];
    std::snprintf(text, sizeof text, "%.3f", v);
    return text;
}

}  // namespace

BenchReport run_bench(const BenchConfig& c, unsigned threads)
{
    c.validate();
    BenchReport report;
    report.config = c;
    const int grid_w = c.page_width / c.stride;
    const int grid_h = c.page_height / c.stride;
    report.dense_placements_per_page = grid_w >= c.query_grid_w && grid_h >= c.query_grid_h
                                           ? static_cast<std::uint64_t>(grid_w - c.query_grid_w + 1) *
                                                 static_cast<std::uint64_t>(grid_h - c.query_grid_h + 1)
                                           : 0;
    report.placement_ratio =
        static_cast<double>(report.dense_placements_per_page) / static_cast<double>(c.regions_per_page);

    std::optional<BenchRow> sparse;
    std::optional<BenchRow> dense;
    if (c.mode != BenchMode::dense) {
        sparse = run_sparse(c, threads);
        report.rows.push_back(*sparse);
    }
    if (c.mode != BenchMode::sparse) {
        DenseOutcome d = run_dense(c, report.dense_placements_per_page);
        report.dense_counted_sample = d.counted;
        report.dense_closed_form_sample = d.closed_form;
        dense = d.row;
        report.rows.push_back(d.row);
    }
    if (sparse && dense) {
        const std::string id = profile_id(c);
        report.costs = compare_costs(to_record(*sparse, id), to_record(*dense, id));
    }
    return report;
}

ordered_json BenchReport::counts_json() const
{
    ordered_json j;
    j["dense_placements_per_page"] = dense_placements_per_page;
    j["sparse_regions_per_page"] = config.regions_per_page;
    j["placement_ratio"] = placement_ratio;
    j["dense_sample_counted_comparisons"] = dense_counted_sample;
    j["dense_sample_closed_form_comparisons"] = dense_closed_form_sample;
    j["rows"] = ordered_json::array();
    for (const BenchRow& r : rows) {
        j["rows"].push_back(ordered_json{{"mode", r.mode},
                                         {"pages", r.pages},
                                         {"queries", r.queries},
                                         {"comparisons", r.comparisons},
                                         {"placements_per_page", r.placements_per_page},
                                         {"comparisons_per_page", r.comparisons_per_page},
                                         {"measured_pages", r.measured_pages},
                                         {"measured_queries", r.measured_queries},
                                         {"extrapolated", r.extrapolated}});
    }
    return j;
}

ordered_json BenchReport::to_json() const
{
    ordered_json j;
    j["config"] = config.to_json();
    j["counts"] = counts_json();
    ordered_json timing = ordered_json::array();
    for (const BenchRow& r : rows) {
        timing.push_back(ordered_json{{"mode", r.mode}, {"wall_ms", r.wall_ms}, {"per_query_ms", r.per_query_ms}});
    }
    j["timing"] = timing;
    if (costs) {
        j["cost_report"] = ordered_json{{"placement_ratio", costs->placement_ratio},
                                        {"comparison_ratio", costs->comparison_ratio},
                                        {"wall_ratio", costs->wall_ratio},
                                        {"sparse_per_query_ms", rows.front().per_query_ms},
                                        {"sparse_budget_ms", docexplore_profile::kSparseBudgetMs}};
    } else {
        j["cost_report"] = nullptr;
    }
    return j;
}

std::string BenchReport::csv() const
{
    std::string out = "mode,pages,queries,comparisons,wall_ms,per_query_ms,placements_per_page,comparisons_per_page,"
                      "measured_pages,measured_queries,extrapolated\n";
    for (const BenchRow& r : rows) {
        out += r.mode + "," + std::to_string(r.pages) + "," + std::to_string(r.queries) + "," +
               std::to_string(r.comparisons) + "," + format_ms(r.wall_ms) + "," + format_ms(r.per_query_ms) + "," +
               std::to_string(r.placements_per_page) + "," + std::to_string(r.comparisons_per_page) + "," +
               std::to_string(r.measured_pages) + "," + std::to_string(r.measured_queries) + "," +
               (r.extrapolated ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace idoc
