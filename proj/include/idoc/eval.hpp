#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "idoc/corpus.hpp"
#include "idoc/geometry.hpp"
#include "idoc/index.hpp"

namespace idoc {

enum class EvalTask { spotting, retrieval };

const char* to_string(EvalTask task);
EvalTask eval_task_from_string(const std::string& name);

struct EvalConfig {
    EvalTask task = EvalTask::spotting;
    double iou_threshold = 0.5;  // relevance iff IoU >= threshold
    std::size_t top_k = 1000;
    TaxonomyThresholds taxonomy;
    /// Drop hits on the query's own source region and remove that region
    /// from the relevant set.
    bool exclude_self = false;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

/// One retrieved item as seen by the evaluator, in rank order.
struct ResultHit {
    std::string page_id;
    BBox bbox;
    double similarity = 0.0;
};

struct QueryResults {
    std::string query_id;
    std::vector<ResultHit> hits;
};

using ResultSet = std::vector<QueryResults>;

ResultSet to_result_set(std::span<const std::string> query_ids, std::span<const std::vector<RankedHit>> hits);

/// Results JSONL: {"query_id","rank","page_id","bbox":[x,y,w,h],"similarity"}.
std::string results_jsonl(const ResultSet& results);
ResultSet parse_results_jsonl(std::istream& in, const std::string& source);
void write_results(const ResultSet& results, const std::filesystem::path& file);
ResultSet read_results(const std::filesystem::path& file);

struct QueryScore {
    std::string query_id;
    std::string category;
    QueryCell cell;
    double ap = 0.0;
    std::size_t n_relevant = 0;
    std::size_t n_retrieved = 0;

    friend bool operator==(const QueryScore&, const QueryScore&) = default;
};

struct CellScore {
    QueryCell cell;
    std::size_t queries = 0;
    std::optional<double> map;  // empty when the cell holds no query

    friend bool operator==(const CellScore&, const CellScore&) = default;
};

struct EvalReport {
    EvalConfig config;
    std::vector<QueryScore> per_query;
    std::vector<CellScore> per_cell;  // all_cells() order
    double map = 0.0;                 // unweighted mean of per-query AP
    std::vector<std::string> skipped; // exclude_self left no relevant item
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();

    bool same_scores(const EvalReport& other) const;
    nlohmann::ordered_json to_json() const;
    std::string per_query_csv() const;
    std::string per_cell_csv() const;
};

/// (sum over relevant positions k of precision@k) / n_relevant_total.
double average_precision(std::span<const std::uint8_t> relevances, std::size_t n_relevant_total);

/// 1 iff some unmatched occurrence on the hit's page has IoU >= threshold;
/// the best such occurrence (first on ties) is then marked in `matched`.
/// `occurrences` holds the query category's occurrences; `matched` is
/// parallel to it.
int relevance_spotting(const ResultHit& hit, std::span<const Occurrence> occurrences, double iou_threshold,
                       std::vector<bool>& matched);

EvalReport evaluate_spotting(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg);
EvalReport evaluate_retrieval(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg);
EvalReport evaluate(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg);

/// Deliberately naive twin of evaluate(): quadratic matching and its own
/// IoU, AP and taxonomy arithmetic, sharing no code with the fast path.
EvalReport oracle_evaluate(const ResultSet& results, const GroundTruth& truth, const EvalConfig& cfg);

/// Reference mAP values reported for the full-scale DocExplore setup (deep
/// encoder, open-set detector). The built-in extractors cannot reach them;
/// they are kept for orientation only.
namespace published_reference {
inline constexpr double kSpottingOverall = 0.620;
inline constexpr double kSpottingSmallNonSquare = 0.588;
inline constexpr double kSpottingNmsOverall = 0.637;
inline constexpr double kSpottingMixNmsSmallNonSquare = 0.612;
inline constexpr double kRetrievalOverall = 0.789;
inline constexpr double kRetrievalDenseBaseline = 0.799;
}  // namespace published_reference

}  // namespace idoc
