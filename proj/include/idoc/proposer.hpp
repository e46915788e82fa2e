#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idoc/corpus.hpp"
#include "idoc/geometry.hpp"

namespace idoc {

/// A proposed region of interest on a page.
struct Region {
    std::string page_id;
    BBox bbox;
    double score = 0.0;
    std::string label;

    friend bool operator==(const Region&, const Region&) = default;
};

/// "<page_id>#<region_index>", the id regions carry in embedding files.
std::string region_id(const std::string& page_id, std::size_t region_index);

enum class ProposerKind { detections, grid, saliency };

const char* to_string(ProposerKind kind);
ProposerKind proposer_kind_from_string(const std::string& name);

struct GridCell {
    int w = 64;
    int h = 64;

    friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct ProposerConfig {
    ProposerKind kind = ProposerKind::saliency;
    double min_score = 0.01;
    double nms_iou = 0.5;

    std::filesystem::path detections_file;

    std::vector<GridCell> grid_cells{GridCell{}};
    double grid_stride_fraction = 0.5;

    double gradient_threshold = 100.0;  // Sobel magnitude on 8-bit grayscale
    int min_component_area = 50;       // pixels

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ProposerConfig from_json(const nlohmann::json& j);
};

/// Clips to the page, drops boxes with nothing left or score < min_score,
/// then applies NMS at nms_iou. Output is in NMS order.
std::vector<Region> finalize_regions(const std::vector<Region>& raw, const Page& page, const ProposerConfig& cfg);

/// Raw detections from a JSONL stream, one object per line:
/// {"page_id","x","y","w","h","score","label"}. Blank lines are skipped.
std::vector<Region> parse_detections(std::istream& in, const std::string& source);

/// Detections grouped and finalized per page, concatenated in page order.
std::vector<Region> ingest_detections(const std::filesystem::path& file, const std::vector<Page>& pages,
                                      const ProposerConfig& cfg);

std::vector<Region> grid_propose(const Page& page, const ProposerConfig& cfg);
std::vector<Region> saliency_propose(const Page& page, const ProposerConfig& cfg);

/// Runs the configured proposer; result[i] belongs to pages[i].
std::vector<std::vector<Region>> propose(const std::vector<Page>& pages, const ProposerConfig& cfg,
                                         unsigned threads = 1);

}  // namespace idoc
