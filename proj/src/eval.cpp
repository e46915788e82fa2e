#include "idoc/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "idoc/embedding_file.hpp"
#include "idoc/error.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace idoc {

const char* to_string(EvalTask task)
{
    return task == EvalTask::spotting ? "spotting" : "retrieval";
}

EvalTask eval_task_from_string(const std::string& name)
{
    if (name == "spotting") {
        return EvalTask::spotting;
    }
    if (name == "retrieval") {
        return EvalTask::retrieval;
    }
    throw_usage_error("unknown task '" + name + "' (spotting|retrieval)");
}

void EvalConfig::validate() const
{
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw_usage_error("evaluation iou threshold must lie in (0,1]");
    }
    if (top_k < 1) {
        throw_usage_error("evaluation top_k must be >= 1");
    }
    if (!(taxonomy.area > 0.0) || !(taxonomy.aspect >= 1.0)) {
        throw_usage_error("taxonomy needs area threshold > 0 and aspect threshold >= 1");
    }
}

ordered_json EvalConfig::to_json() const
{
    return ordered_json{{"task", to_string(task)},
                        {"iou_threshold", iou_threshold},
                        {"top_k", top_k},
                        {"area_threshold", taxonomy.area},
                        {"aspect_threshold", taxonomy.aspect},
                        {"exclude_self", exclude_self}};
}

// ---------------------------------------------------------------------------
// Results I/O

ResultSet to_result_set(std::span<const std::string> query_ids, std::span<const std::vector<RankedHit>> hits)
{
    if (query_ids.size() != hits.size()) {
        throw Error(ErrorKind::internal, "query ids and hit lists differ in length");
    }
    ResultSet out;
    for (std::size_t q = 0; q < query_ids.size(); ++q) {
        QueryResults r{query_ids[q], {}};
        for (const RankedHit& h : hits[q]) {
            r.hits.push_back(ResultHit{h.region.page_id, h.region.bbox, h.similarity});
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string results_jsonl(const ResultSet& results)
{
    std::string out;
    for (const QueryResults& q : results) {
        for (std::size_t r = 0; r < q.hits.size(); ++r) {
            const ResultHit& h = q.hits[r];
            const ordered_json j{{"query_id", q.query_id},
                                 {"rank", r + 1},
                                 {"page_id", h.page_id},
                                 {"bbox", {h.bbox.x, h.bbox.y, h.bbox.w, h.bbox.h}},
                                 {"similarity", h.similarity}};
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

ResultSet parse_results_jsonl(std::istream& in, const std::string& source)
{
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<long, ResultHit>>> grouped;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const json j = json::parse(line);
            const std::string id = j.at("query_id").get<std::string>();
            const auto& b = j.at("bbox");
            ResultHit hit{j.at("page_id").get<std::string>(),
                          BBox{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()},
                          j.at("similarity").get<double>()};
            if (!hit.bbox.valid()) {
                throw_data_error(source + ":" + std::to_string(line_no) + ": bbox has non-positive size");
            }
            if (!grouped.contains(id)) {
                order.push_back(id);
            }
            grouped[id].emplace_back(j.at("rank").get<long>(), std::move(hit));
        } catch (const json::exception& e) {
            throw_data_error(source + ":" + std::to_string(line_no) + ": malformed result: " + e.what());
        }
    }

    ResultSet out;
    for (const std::string& id : order) {
        auto& hits = grouped[id];
        std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        QueryResults q{id, {}};
        for (std::size_t i = 0; i < hits.size(); ++i) {
            if (hits[i].first != static_cast<long>(i + 1)) {
                throw_data_error(source + ": ranks of query '" + id + "' are not 1..n");
            }
            q.hits.push_back(std::move(hits[i].second));
        }
        out.push_back(std::move(q));
    }
    return out;
}

void write_results(const ResultSet& results, const std::filesystem::path& file)
{
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
    const std::string text = results_jsonl(results);
    write_file_atomic(file, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

ResultSet read_results(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw_data_error("missing file: " + file.string());
    }
    return parse_results_jsonl(in, file.string());
}

// ---------------------------------------------------------------------------
// Report

bool EvalReport::same_scores(const EvalReport& other) const
{
    return per_query == other.per_query && per_cell == other.per_cell && map == other.map &&
           skipped == other.skipped;
}

ordered_json EvalReport::to_json() const
{
    ordered_json j;
    j["config"] = config.to_json();
    j["map_query_based"] = map;
    j["queries_evaluated"] = per_query.size();
    j["skipped"] = skipped;
    j["per_cell"] = ordered_json::array();
    for (const CellScore& c : per_cell) {
        j["per_cell"].push_back(ordered_json{{"size_class", to_string(c.cell.size)},
                                             {"shape_class", to_string(c.cell.shape)},
                                             {"queries", c.queries},
                                             {"map", c.map ? ordered_json(*c.map) : ordered_json(nullptr)}});
    }
    j["per_query"] = ordered_json::array();
    for (const QueryScore& q : per_query) {
        j["per_query"].push_back(ordered_json{{"query_id", q.query_id},
                                              {"category", q.category},
                                              {"size_class", to_string(q.cell.size)},
                                              {"shape_class", to_string(q.cell.shape)},
                                              {"ap", q.ap},
                                              {"n_relevant", q.n_relevant},
                                              {"n_retrieved", q.n_retrieved}});
    }
    for (const auto& [key, value] : extra.items()) {
        j[key] = value;
    }
    return j;
}

namespace {

std::string format_real(double v)
{
    char text[32];
    std::snprintf(text, sizeof text, "%.10g", v);
    return text;
}

}  // namespace

std::string EvalReport::per_query_csv() const
{
    std::string out = "query_id,category,size_class,shape_class,AP\n";
    for (const QueryScore& q : per_query) {
        out += q.query_id + "," + q.category + "," + to_string(q.cell.size) + "," + to_string(q.cell.shape) + "," +
               format_real(q.ap) + "\n";
    }
    return out;
}

std::string EvalReport::per_cell_csv() const
{
    std::string out = "size_class,shape_class,queries,mAP\n";
    for (const CellScore& c : per_cell) {
        out += std::string(to_string(c.cell.size)) + "," + to_string(c.cell.shape) + "," + std::to_string(c.queries) +
               "," + (c.map ? format_real(*c.map) : std::string()) + "\n";
    }
    out += "all,all," + std::to_string(per_query.size()) + "," + format_real(map) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Fast path

double average_precision(std::span<const std::uint8_t> relevances, std::size_t n_relevant_total)
{
    if (n_relevant_total == 0) {
        throw_data_error("average precision needs at least one relevant item");
    }
    std::size_t found = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < relevances.size(); ++k) {
        if (relevances[k]) {
            ++found;
            sum += static_cast<double>(found) / static_cast<double>(k + 1);
        }
    }
    if (found > n_relevant_total) {
        throw_data_error("more relevant items retrieved than exist");
    }
    return sum / static_cast<double>(n_relevant_total);
}

int relevance_spotting(const ResultHit& hit, std::span<const Occurrence> occurrences, double iou_threshold,
                       std::vector<bool>& matched)
{
    std::size_t best = occurrences.size();
    double best_iou = -1.0;
    for (std::size_t i = 0; i < occurrences.size(); ++i) {
        if (matched[i] || occurrences[i].page_id != hit.page_id) {
            continue;
        }
        const double overlap = iou(hit.bbox, occurrences[i].bbox);
        if (overlap >= iou_threshold && overlap > best_iou) {
            best = i;
            best_iou = overlap;
        }
    }
    if (best == occurrences.size()) {
        return 0;
    }
    matched[best] = true;
    return 1;
}

namespace {

struct PreparedQuery {
    const Query* query = nullptr;
    std::optional<Occurrence> self;  // excluded source region
    std::vector<ResultHit> hits;     // after self-exclusion, before truncation
};

// Shared bookkeeping of both tasks: result lookup, self exclusion, averaging.
class Evaluation {
public:
    Evaluation(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg)
        : truth_(truth), cfg_(cfg)
    {
        cfg.validate();
        std::set<std::string> known;
        for (const Query& q : truth.queries) {
            known.insert(q.query_id);
        }
        for (const QueryResults& r : results) {
            if (!known.contains(r.query_id)) {
                throw_data_error("results mention unknown query '" + r.query_id + "'");
            }
            if (!by_query_.emplace(r.query_id, &r).second) {
                throw_data_error("results list query '" + r.query_id + "' twice");
            }
        }
        for (std::size_t i = 0; i < truth.occurrences.size(); ++i) {
            const Occurrence& o = truth.occurrences[i];
            buckets_[{o.category, o.page_id}].push_back(i);
            by_category_[o.category].push_back(i);
        }
    }

    PreparedQuery prepare(const Query& q) const
    {
        PreparedQuery p;
        p.query = &q;
        auto cat = by_category_.find(q.category);
        if (cat == by_category_.end() || cat->second.empty()) {
            throw_data_error("query '" + q.query_id + "' has zero ground-truth occurrences");
        }
        if (cfg_.exclude_self) {
            p.self = Occurrence{q.category, q.source_page_id, q.bbox};
        }
        auto it = by_query_.find(q.query_id);
        if (it != by_query_.end()) {
            for (const ResultHit& h : it->second->hits) {
                if (p.self && h.page_id == q.source_page_id && iou(h.bbox, q.bbox) >= cfg_.iou_threshold) {
                    continue;
                }
                p.hits.push_back(h);
            }
        }
        return p;
    }

    bool is_self(const PreparedQuery& p, std::size_t occurrence) const
    {
        return p.self && truth_.occurrences[occurrence] == *p.self;
    }

    std::vector<std::size_t> relevant_occurrences(const PreparedQuery& p, const std::string& page) const
    {
        std::vector<std::size_t> out;
        auto it = buckets_.find({p.query->category, page});
        if (it == buckets_.end()) {
            return out;
        }
        for (std::size_t i : it->second) {
            if (!is_self(p, i)) {
                out.push_back(i);
            }
        }
        return out;
    }

    std::vector<std::size_t> category_occurrences(const PreparedQuery& p) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i : by_category_.at(p.query->category)) {
            if (!is_self(p, i)) {
                out.push_back(i);
            }
        }
        return out;
    }

    EvalReport finish(std::vector<QueryScore> scores, std::vector<std::string> skipped) const
    {
        EvalReport report;
        report.config = cfg_;
        report.skipped = std::move(skipped);
        double total = 0.0;
        for (const QueryScore& s : scores) {
            total += s.ap;
        }
        report.map = scores.empty() ? 0.0 : total / static_cast<double>(scores.size());
        for (const QueryCell& cell : all_cells()) {
            CellScore c{cell, 0, std::nullopt};
            double sum = 0.0;
            for (const QueryScore& s : scores) {
                if (s.cell == cell) {
                    ++c.queries;
                    sum += s.ap;
                }
            }
            if (c.queries > 0) {
                c.map = sum / static_cast<double>(c.queries);
            }
            report.per_cell.push_back(c);
        }
        report.per_query = std::move(scores);
        return report;
    }

    const GroundTruth& truth() const { return truth_; }
    const EvalConfig& config() const { return cfg_; }

private:
    const GroundTruth& truth_;
    const EvalConfig& cfg_;
    std::map<std::string, const QueryResults*> by_query_;
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> buckets_;
    std::map<std::string, std::vector<std::size_t>> by_category_;
};

}  // namespace

EvalReport evaluate_spotting(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg)
{
    const Evaluation ev(results, truth, cfg);
    std::vector<QueryScore> scores;
    std::vector<std::string> skipped;
    for (const Query& q : truth.queries) {
        PreparedQuery p = ev.prepare(q);
        const std::size_t n_relevant = ev.category_occurrences(p).size();
        if (n_relevant == 0) {
            skipped.push_back(q.query_id);
            continue;
        }
        if (p.hits.size() > cfg.top_k) {
            p.hits.resize(cfg.top_k);
        }

        // Per-page candidate lists with their own matched flags.
        std::map<std::string, std::pair<std::vector<Occurrence>, std::vector<bool>>> pages;
        std::vector<std::uint8_t> rel;
        rel.reserve(p.hits.size());
        for (const ResultHit& hit : p.hits) {
            auto it = pages.find(hit.page_id);
            if (it == pages.end()) {
                std::vector<Occurrence> occ;
                for (std::size_t i : ev.relevant_occurrences(p, hit.page_id)) {
                    occ.push_back(truth.occurrences[i]);
                }
                std::vector<bool> matched(occ.size(), false);
                it = pages.emplace(hit.page_id, std::make_pair(std::move(occ), std::move(matched))).first;
            }
            auto& [occ, matched] = it->second;
            rel.push_back(static_cast<std::uint8_t>(relevance_spotting(hit, occ, cfg.iou_threshold, matched)));
        }
        scores.push_back(QueryScore{q.query_id, q.category, categorize_query(q.bbox, cfg.taxonomy),
                                    average_precision(rel, n_relevant), n_relevant, p.hits.size()});
    }
    return ev.finish(std::move(scores), std::move(skipped));
}

EvalReport evaluate_retrieval(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg)
{
    const Evaluation ev(results, truth, cfg);
    std::vector<QueryScore> scores;
    std::vector<std::string> skipped;
    for (const Query& q : truth.queries) {
        const PreparedQuery p = ev.prepare(q);
        std::set<std::string> relevant_pages;
        for (std::size_t i : ev.category_occurrences(p)) {
            relevant_pages.insert(truth.occurrences[i].page_id);
        }
        if (relevant_pages.empty()) {
            skipped.push_back(q.query_id);
            continue;
        }

        std::set<std::string> seen;
        std::vector<std::uint8_t> rel;
        for (const ResultHit& hit : p.hits) {
            if (rel.size() == cfg.top_k) {
                break;
            }
            if (seen.insert(hit.page_id).second) {
                rel.push_back(relevant_pages.contains(hit.page_id) ? 1 : 0);
            }
        }
        scores.push_back(QueryScore{q.query_id, q.category, categorize_query(q.bbox, cfg.taxonomy),
                                    average_precision(rel, relevant_pages.size()), relevant_pages.size(), rel.size()});
    }
    return ev.finish(std::move(scores), std::move(skipped));
}

EvalReport evaluate(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg)
{
    return cfg.task == EvalTask::spotting ? evaluate_spotting(results, truth, cfg)
                                          : evaluate_retrieval(results, truth, cfg);
}

}  // namespace idoc
