#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "idoc/corpus.hpp"
#include "idoc/eval.hpp"
#include "support.hpp"

namespace idoc::testing {

inline Query make_query(const std::string& id, const std::string& cat, const std::string& page, BBox box)
{
    Query q;
    q.query_id = id;
    q.category = cat;
    q.source_page_id = page;
    q.bbox = box;
    return q;
}

struct RandomCase {
    GroundTruth truth;
    ResultSet results;
    EvalConfig cfg;
};

/// Random evaluation instance: at most 20 queries, 50 hits per query and
/// 10 occurrences, with a random task and configuration.
inline RandomCase random_case(std::uint64_t seed)
{
    Gen gen(seed);
    RandomCase rc;
    const int n_pages = gen.integer(1, 4);
    const int n_cats = gen.integer(1, 3);
    for (int c = 0; c < n_cats; ++c) {
        rc.truth.categories.push_back("c" + std::to_string(c));
    }
    auto page = [&] { return "p" + std::to_string(gen.integer(0, n_pages - 1)); };
    const int n_occ = gen.integer(1, 10);
    for (int i = 0; i < n_occ; ++i) {
        rc.truth.occurrences.push_back(
            Occurrence{rc.truth.categories[static_cast<std::size_t>(gen.integer(0, n_cats - 1))], page(), gen.box(60, 40)});
    }
    if (n_occ < 10 && gen.coin(0.3)) {
        rc.truth.occurrences.push_back(rc.truth.occurrences.front());  // exact duplicate annotation
    }
    const int n_queries = gen.integer(1, 20);
    for (int q = 0; q < n_queries; ++q) {
        const Occurrence& src = rc.truth.occurrences[static_cast<std::size_t>(gen.integer(0, n_occ - 1))];
        rc.truth.queries.push_back(make_query("q" + std::to_string(q), src.category, src.page_id, src.bbox));
    }
    for (int q = 0; q < n_queries; ++q) {
        if (gen.coin(0.1)) {
            continue;  // query with no results
        }
        QueryResults r{"q" + std::to_string(q), {}};
        const int n_hits = gen.integer(0, 50);
        for (int h = 0; h < n_hits; ++h) {
            ResultHit hit;
            if (gen.coin(0.5)) {
                const Occurrence& o = rc.truth.occurrences[static_cast<std::size_t>(gen.integer(0, n_occ - 1))];
                hit.page_id = o.page_id;
                hit.bbox = BBox{o.bbox.x + gen.integer(-4, 4), o.bbox.y + gen.integer(-4, 4),
                                std::max(1, o.bbox.w + gen.integer(-4, 4)), std::max(1, o.bbox.h + gen.integer(-4, 4))};
            } else {
                hit.page_id = page();
                hit.bbox = gen.box(60, 40);
            }
            hit.similarity = 1.0 - 0.01 * h;
            r.hits.push_back(hit);
        }
        rc.results.push_back(std::move(r));
    }
    // Results need not follow query order.
    for (std::size_t i = rc.results.size(); i > 1; --i) {
        std::swap(rc.results[i - 1], rc.results[static_cast<std::size_t>(gen.integer(0, static_cast<int>(i) - 1))]);
    }
    rc.cfg.task = gen.coin() ? EvalTask::spotting : EvalTask::retrieval;
    rc.cfg.iou_threshold = std::vector<double>{0.1, 0.3, 0.5, 0.7, 1.0}[static_cast<std::size_t>(gen.integer(0, 4))];
    rc.cfg.top_k = static_cast<std::size_t>(gen.integer(1, 60));
    rc.cfg.exclude_self = gen.coin(0.4);
    rc.cfg.taxonomy.area = gen.real(50.0, 1500.0);
    rc.cfg.taxonomy.aspect = gen.real(1.0, 3.0);
    return rc;
}

}  // namespace idoc::testing
