#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "idoc/geometry.hpp"

namespace idoc {

/// A catalog page. `image` is 8-bit, 3-channel, in OpenCV (BGR) channel order.
struct Page {
    std::string page_id;
    cv::Mat image;

    int width() const noexcept { return image.cols; }
    int height() const noexcept { return image.rows; }
};

struct Query {
    std::string query_id;
    std::string category;
    std::string source_page_id;
    BBox bbox;
    cv::Mat image;  // crop of the source page, empty until resolved against pages
};

struct Occurrence {
    std::string category;
    std::string page_id;
    BBox bbox;

    friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

struct GroundTruth {
    std::vector<std::string> categories;  // sorted, unique
    std::vector<Query> queries;
    std::vector<Occurrence> occurrences;
};

struct Corpus {
    std::vector<Page> pages;  // sorted by page_id
    GroundTruth truth;
};

bool same_annotations(const GroundTruth& a, const GroundTruth& b);

nlohmann::ordered_json groundtruth_to_json(const GroundTruth& truth);
GroundTruth groundtruth_from_json(const nlohmann::json& doc);

/// Reads the ground-truth JSON and checks the invariants that do not need
/// page images (known categories, every query has an occurrence).
GroundTruth read_groundtruth(const std::filesystem::path& file);
void write_groundtruth(const GroundTruth& truth, const std::filesystem::path& file);

/// Loads every PNG/JPEG in `dir`; page_id is the filename stem.
std::vector<Page> load_pages(const std::filesystem::path& dir);

/// Checks cross-references between annotations and pages, then crops the
/// query images. Throws on the first dangling page id or out-of-page box.
void resolve_queries(GroundTruth& truth, const std::vector<Page>& pages);

Corpus load_corpus(const std::filesystem::path& pages_dir, const std::filesystem::path& groundtruth_file);

/// Writes pages as `<dir>/pages/<page_id>.png` and `<dir>/gt.json`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// CRC-32 over page ids and pixels; identifies a corpus in manifests.
std::string corpus_fingerprint(const std::vector<Page>& pages);

// ---------------------------------------------------------------------------
// Synthetic planted-pattern corpora

struct SynthParams {
    int pages = 10;
    int categories = 5;
    int occurrences_per_category = 4;
    int page_width = 602;
    int page_height = 920;
    std::uint64_t seed = 7;
};

/// Stamps one procedurally drawn glyph per category at random, mutually
/// non-overlapping positions and scales in [0.5, 2.0] over a textured
/// background. The first stamp of each category is that category's query.
Corpus generate_synthetic(const SynthParams& params);

// ---------------------------------------------------------------------------
// Query taxonomy

enum class SizeClass { big, small };
enum class ShapeClass { square, non_square };

struct TaxonomyThresholds {
    double area = 10000.0;  // px^2; big iff w*h >= area
    double aspect = 1.5;    // square iff max(w,h)/min(w,h) <= aspect
};

struct QueryCell {
    SizeClass size;
    ShapeClass shape;

    friend bool operator==(const QueryCell&, const QueryCell&) = default;
};

QueryCell categorize_query(const BBox& bbox, const TaxonomyThresholds& thresholds);
inline QueryCell categorize_query(const Query& q, const TaxonomyThresholds& thresholds)
{
    return categorize_query(q.bbox, thresholds);
}

const char* to_string(SizeClass s);
const char* to_string(ShapeClass s);
/// "big-square", "big-non-square", "small-square", "small-non-square".
std::string cell_name(const QueryCell& cell);
/// The four cells in reporting order.
std::vector<QueryCell> all_cells();

struct CalibrationPoint {
    double area = 0.0;
    double aspect = 0.0;
    double small_non_square_fraction = 0.0;
};

struct Calibration {
    CalibrationPoint best;
    std::vector<CalibrationPoint> sweep;
};

/// Grid search over area and aspect thresholds for the pair whose
/// small/non-square share is closest to `target`.
Calibration calibrate_taxonomy(const std::vector<Query>& queries, double target);

// ---------------------------------------------------------------------------
// DocExplore annotation conversion

/// Converts the DocExplore annotation CSV (see README) into the engine's
/// ground-truth schema.
GroundTruth convert_docexplore(const std::filesystem::path& annotation_csv);

}  // namespace idoc
