#include "idoc/dense.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "idoc/error.hpp"
#include "idoc/similarity.hpp"

namespace idoc {

std::vector<float> FeatureMap::cell(std::size_t c) const
{
    std::vector<float> out(dim);
    const std::size_t n = cell_count();
    for (std::size_t d = 0; d < dim; ++d) {
        out[d] = cells[d * n + c];
    }
    return out;
}

FeatureMap feature_map_from_vectors(std::string id, int grid_w, int grid_h, int stride, std::uint32_t dim,
                                    std::span<const float> record_major)
{
    FeatureMap map;
    map.page_id = std::move(id);
    map.grid_w = grid_w;
    map.grid_h = grid_h;
    map.stride = stride;
    map.width_px = grid_w * stride;
    map.height_px = grid_h * stride;
    map.dim = dim;
    const std::size_t n = map.cell_count();
    if (record_major.size() != n * dim) {
        throw Error(ErrorKind::internal, "feature map vectors do not match grid x dim");
    }
    map.cells.resize(n * dim);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t d = 0; d < dim; ++d) {
            map.cells[d * n + c] = record_major[c * dim + d];
        }
    }
    return map;
}

FeatureMap build_feature_map(const std::string& id, const cv::Mat& image, int stride, const EncoderSpec& spec,
                             int window)
{
    if (stride < 1 || stride > std::min(image.cols, image.rows)) {
        throw_usage_error("stride " + std::to_string(stride) + " must lie in [1, " +
                          std::to_string(std::min(image.cols, image.rows)) + "] for '" + id + "'");
    }
    const int side = window > 0 ? window : stride;
    const int grid_w = image.cols / stride;
    const int grid_h = image.rows / stride;
    const std::uint32_t dim = spec.dim();

    std::vector<float> record_major;
    record_major.reserve(static_cast<std::size_t>(grid_w) * grid_h * dim);
    for (int i = 0; i < grid_h; ++i) {
        for (int j = 0; j < grid_w; ++j) {
            const auto box = clip(BBox{j * stride, i * stride, side, side}, image.cols, image.rows);
            const Embedding e = encode(image(cv::Rect(box->x, box->y, box->w, box->h)), spec);
            record_major.insert(record_major.end(), e.vector.begin(), e.vector.end());
        }
    }
    FeatureMap map = feature_map_from_vectors(id, grid_w, grid_h, stride, dim, record_major);
    map.width_px = image.cols;
    map.height_px = image.rows;
    return map;
}

std::uint64_t placement_count(const FeatureMap& query, const FeatureMap& page) noexcept
{
    if (query.grid_w > page.grid_w || query.grid_h > page.grid_h || query.grid_w < 1 || query.grid_h < 1) {
        return 0;
    }
    return static_cast<std::uint64_t>(page.grid_w - query.grid_w + 1) * (page.grid_h - query.grid_h + 1);
}

namespace {

struct Candidate {
    double score;
    std::size_t page;
    std::size_t placement;
};

bool ranked_before(const Candidate& a, const Candidate& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    if (a.page != b.page) {
        return a.page < b.page;
    }
    return a.placement < b.placement;
}

}  // namespace

DenseResult dense_search(const FeatureMap& query, std::span<const FeatureMap> pages, std::size_t top_k)
{
    if (top_k < 1) {
        throw_usage_error("top_k must be >= 1");
    }
    for (const FeatureMap& page : pages) {
        if (page.dim != query.dim || page.stride != query.stride) {
            throw_data_error("feature map of '" + page.page_id + "' does not match the query's dim/stride");
        }
    }

    DenseResult result;
    result.cost.pages = pages.size();
    result.cost.queries = 1;
    const auto start = std::chrono::steady_clock::now();

    const std::size_t qw = static_cast<std::size_t>(query.grid_w);
    const std::size_t qh = static_cast<std::size_t>(query.grid_h);
    const std::size_t q_cells = query.cell_count();
    std::vector<std::vector<float>> query_cells(q_cells);
    for (std::size_t c = 0; c < q_cells; ++c) {
        query_cells[c] = query.cell(c);
    }

    std::vector<Candidate> best;
    std::vector<std::vector<double>> sims(q_cells);
    for (std::size_t p = 0; p < pages.size(); ++p) {
        const FeatureMap& page = pages[p];
        const std::uint64_t placements = placement_count(query, page);
        if (placements == 0) {
            continue;
        }
        result.cost.placements += placements;
        result.cost.vector_comparisons += placements * q_cells;

        // Cell-to-cell cosines, shared by every placement that aligns them.
        const std::size_t n = page.cell_count();
        for (std::size_t c = 0; c < q_cells; ++c) {
            sims[c].resize(n);
            scan_similarities(page.cells, n, query_cells[c], sims[c]);
            for (double& s : sims[c]) {
                s = std::clamp(s, -1.0, 1.0);
            }
        }

        const std::size_t pw = static_cast<std::size_t>(page.grid_w);
        const std::size_t span_w = pw - qw + 1;
        const std::size_t span_h = static_cast<std::size_t>(page.grid_h) - qh + 1;
        std::vector<Candidate> local;
        local.reserve(static_cast<std::size_t>(placements));
        for (std::size_t gy = 0; gy < span_h; ++gy) {
            for (std::size_t gx = 0; gx < span_w; ++gx) {
                double sum = 0.0;
                for (std::size_t i = 0; i < qh; ++i) {
                    for (std::size_t j = 0; j < qw; ++j) {
                        sum += sims[i * qw + j][(gy + i) * pw + gx + j];
                        ++result.cost.counted_comparisons;
                    }
                }
                local.push_back(Candidate{sum / static_cast<double>(q_cells), p, gy * span_w + gx});
            }
        }
        const std::size_t keep = std::min(top_k, local.size());
        std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(), ranked_before);
        best.insert(best.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep));
        const std::size_t global_keep = std::min(top_k, best.size());
        std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(global_keep), best.end(),
                          ranked_before);
        best.resize(global_keep);
    }

    const int hit_w = std::max(1, query.width_px);
    const int hit_h = std::max(1, query.height_px);
    for (std::size_t r = 0; r < best.size(); ++r) {
        const Candidate& c = best[r];
        const FeatureMap& page = pages[c.page];
        const std::size_t span_w = static_cast<std::size_t>(page.grid_w) - qw + 1;
        const int gx = static_cast<int>(c.placement % span_w);
        const int gy = static_cast<int>(c.placement / span_w);
        Region region{page.page_id, BBox{gx * page.stride, gy * page.stride, hit_w, hit_h},
                      std::clamp(c.score, 0.0, 1.0), "dense"};
        result.hits.push_back(RankedHit{std::move(region), c.placement, c.score, static_cast<int>(r + 1)});
    }

    const auto stop = std::chrono::steady_clock::now();
    result.cost.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    return result;
}

CostReport compare_costs(const CostRecord& sparse, const CostRecord& dense)
{
    if (sparse.corpus_id != dense.corpus_id) {
        throw_data_error("cost records come from different corpora: '" + sparse.corpus_id + "' vs '" +
                         dense.corpus_id + "'");
    }
    auto ratio = [](double num, double den) {
        if (num == den) {
            return 1.0;
        }
        return den == 0.0 ? std::numeric_limits<double>::infinity() : num / den;
    };
    CostReport report;
    report.sparse = sparse;
    report.dense = dense;
    report.placement_ratio = ratio(static_cast<double>(dense.placements), static_cast<double>(sparse.placements));
    report.comparison_ratio = ratio(static_cast<double>(dense.comparisons), static_cast<double>(sparse.comparisons));
    report.wall_ratio = ratio(dense.wall_ms, sparse.wall_ms);
    return report;
}

}  // namespace idoc
