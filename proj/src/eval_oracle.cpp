// Brute-force reference evaluator. Everything is recomputed from first
// principles with linear scans; only the data types are shared.

#include <cstdint>

#include "idoc/error.hpp"
#include "idoc/eval.hpp"

namespace idoc {

namespace {

long long overlap_1d(long long a0, long long a1, long long b0, long long b1)
{
    const long long lo = a0 > b0 ? a0 : b0;
    const long long hi = a1 < b1 ? a1 : b1;
    return hi > lo ? hi - lo : 0;
}

double naive_iou(const BBox& a, const BBox& b)
{
    const long long ix = overlap_1d(a.x, static_cast<long long>(a.x) + a.w, b.x, static_cast<long long>(b.x) + b.w);
    const long long iy = overlap_1d(a.y, static_cast<long long>(a.y) + a.h, b.y, static_cast<long long>(b.y) + b.h);
    const long long inter = ix * iy;
    if (inter == 0) {
        return 0.0;
    }
    const long long area_a = static_cast<long long>(a.w) * a.h;
    const long long area_b = static_cast<long long>(b.w) * b.h;
    return static_cast<double>(inter) / static_cast<double>(area_a + area_b - inter);
}

// precision@k recomputed from scratch at every relevant rank.
double naive_ap(const std::vector<int>& rel, std::size_t n_relevant)
{
    if (n_relevant == 0) {
        throw_data_error("average precision needs at least one relevant item");
    }
    double sum = 0.0;
    std::size_t total_hits = 0;
    for (std::size_t k = 0; k < rel.size(); ++k) {
        if (rel[k] == 0) {
            continue;
        }
        std::size_t in_prefix = 0;
        for (std::size_t j = 0; j <= k; ++j) {
            in_prefix += rel[j] != 0 ? 1 : 0;
        }
        sum += static_cast<double>(in_prefix) / static_cast<double>(k + 1);
        ++total_hits;
    }
    if (total_hits > n_relevant) {
        throw_data_error("more relevant items retrieved than exist");
    }
    return sum / static_cast<double>(n_relevant);
}

QueryCell naive_cell(const BBox& b, const TaxonomyThresholds& t)
{
    const int longer = b.w > b.h ? b.w : b.h;
    const int shorter = b.w > b.h ? b.h : b.w;
    const bool big = static_cast<double>(static_cast<long long>(b.w) * b.h) >= t.area;
    const bool square = static_cast<double>(longer) / static_cast<double>(shorter) <= t.aspect;
    return QueryCell{big ? SizeClass::big : SizeClass::small, square ? ShapeClass::square : ShapeClass::non_square};
}

bool same_box(const BBox& a, const BBox& b)
{
    return a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
}

bool is_source(const Occurrence& o, const Query& q)
{
    return o.category == q.category && o.page_id == q.source_page_id && same_box(o.bbox, q.bbox);
}

}  // namespace

EvalReport oracle_evaluate(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg)
{
    cfg.validate();
    for (std::size_t i = 0; i < results.size(); ++i) {
        bool known = false;
        for (const Query& q : truth.queries) {
            known = known || q.query_id == results[i].query_id;
        }
        if (!known) {
            throw_data_error("results mention unknown query '" + results[i].query_id + "'");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (results[j].query_id == results[i].query_id) {
                throw_data_error("results list query '" + results[i].query_id + "' twice");
            }
        }
    }

    EvalReport report;
    report.config = cfg;
    for (const Query& q : truth.queries) {
        std::size_t in_category = 0;
        for (const Occurrence& o : truth.occurrences) {
            in_category += o.category == q.category ? 1 : 0;
        }
        if (in_category == 0) {
            throw_data_error("query '" + q.query_id + "' has zero ground-truth occurrences");
        }

        std::vector<const Occurrence*> relevant;
        for (const Occurrence& o : truth.occurrences) {
            if (o.category == q.category && !(cfg.exclude_self && is_source(o, q))) {
                relevant.push_back(&o);
            }
        }

        std::vector<ResultHit> hits;
        for (const QueryResults& r : results) {
            if (r.query_id != q.query_id) {
                continue;
            }
            for (const ResultHit& h : r.hits) {
                const bool own = cfg.exclude_self && h.page_id == q.source_page_id &&
                                 naive_iou(h.bbox, q.bbox) >= cfg.iou_threshold;
                if (!own) {
                    hits.push_back(h);
                }
            }
        }

        std::vector<int> rel;
        std::size_t n_relevant = 0;
        if (cfg.task == EvalTask::spotting) {
            n_relevant = relevant.size();
            if (n_relevant > 0) {
                std::vector<bool> used(relevant.size(), false);
                for (std::size_t r = 0; r < hits.size() && r < cfg.top_k; ++r) {
                    std::size_t pick = relevant.size();
                    double pick_iou = -1.0;
                    for (std::size_t i = 0; i < relevant.size(); ++i) {
                        if (used[i] || relevant[i]->page_id != hits[r].page_id) {
                            continue;
                        }
                        const double v = naive_iou(hits[r].bbox, relevant[i]->bbox);
                        if (v >= cfg.iou_threshold && v > pick_iou) {
                            pick = i;
                            pick_iou = v;
                        }
                    }
                    if (pick < relevant.size()) {
                        used[pick] = true;
                    }
                    rel.push_back(pick < relevant.size() ? 1 : 0);
                }
            }
        } else {
            std::vector<std::string> pages;
            for (const Occurrence* o : relevant) {
                bool seen = false;
                for (const std::string& p : pages) {
                    seen = seen || p == o->page_id;
                }
                if (!seen) {
                    pages.push_back(o->page_id);
                }
            }
            n_relevant = pages.size();
            std::vector<std::string> listed;
            for (const ResultHit& h : hits) {
                if (listed.size() == cfg.top_k) {
                    break;
                }
                bool seen = false;
                for (const std::string& p : listed) {
                    seen = seen || p == h.page_id;
                }
                if (seen) {
                    continue;
                }
                listed.push_back(h.page_id);
                bool good = false;
                for (const std::string& p : pages) {
                    good = good || p == h.page_id;
                }
                rel.push_back(good ? 1 : 0);
            }
        }

        if (n_relevant == 0) {
            report.skipped.push_back(q.query_id);
            continue;
        }
        report.per_query.push_back(QueryScore{q.query_id, q.category, naive_cell(q.bbox, cfg.taxonomy),
                                              naive_ap(rel, n_relevant), n_relevant, rel.size()});
    }

    double total = 0.0;
    for (const QueryScore& s : report.per_query) {
        total += s.ap;
    }
    report.map = report.per_query.empty() ? 0.0 : total / static_cast<double>(report.per_query.size());

    const SizeClass sizes[] = {SizeClass::big, SizeClass::small};
    const ShapeClass shapes[] = {ShapeClass::square, ShapeClass::non_square};
    for (SizeClass size : sizes) {
        for (ShapeClass shape : shapes) {
            CellScore c{QueryCell{size, shape}, 0, std::nullopt};
            double sum = 0.0;
            for (const QueryScore& s : report.per_query) {
                if (s.cell.size == size && s.cell.shape == shape) {
                    ++c.queries;
                    sum += s.ap;
                }
            }
            if (c.queries > 0) {
                c.map = sum / static_cast<double>(c.queries);
            }
            report.per_cell.push_back(c);
        }
    }
    return report;
}

}  // namespace idoc
