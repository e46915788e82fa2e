#include "idoc/proposer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <opencv2/imgproc.hpp>

#include "idoc/error.hpp"
#include "idoc/parallel.hpp"

namespace idoc {

std::string region_id(const std::string& page_id, std::size_t region_index)
{
    return page_id + "#" + std::to_string(region_index);
}

const char* to_string(ProposerKind kind)
{
    switch (kind) {
    case ProposerKind::detections:
        return "detections";
    case ProposerKind::grid:
        return "grid";
    case ProposerKind::saliency:
        return "saliency";
    }
    return "?";
}

ProposerKind proposer_kind_from_string(const std::string& name)
{
    if (name == "detections") {
        return ProposerKind::detections;
    }
    if (name == "grid") {
        return ProposerKind::grid;
    }
    if (name == "saliency") {
        return ProposerKind::saliency;
    }
    throw_usage_error("unknown proposer '" + name + "' (detections|grid|saliency)");
}

void ProposerConfig::validate() const
{
    if (!(min_score >= 0.0 && min_score <= 1.0)) {
        throw_usage_error("min-score must lie in [0,1]");
    }
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) {
        throw_usage_error("nms-iou must lie in [0,1]");
    }
    if (kind == ProposerKind::detections && detections_file.empty()) {
        throw_usage_error("the detections proposer needs a detections file");
    }
    if (kind == ProposerKind::grid) {
        if (grid_cells.empty()) {
            throw_usage_error("the grid proposer needs at least one cell size");
        }
        for (const GridCell& c : grid_cells) {
            if (c.w < 1 || c.h < 1) {
                throw_usage_error("grid cell sizes must be positive");
            }
        }
        if (!(grid_stride_fraction > 0.0 && grid_stride_fraction <= 1.0)) {
            throw_usage_error("grid stride fraction must lie in (0,1]");
        }
    }
    if (kind == ProposerKind::saliency && (gradient_threshold < 0.0 || min_component_area < 1)) {
        throw_usage_error("saliency needs gradient threshold >= 0 and min area >= 1");
    }
}

nlohmann::ordered_json ProposerConfig::to_json() const
{
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind);
    j["min_score"] = min_score;
    j["nms_iou"] = nms_iou;
    switch (kind) {
    case ProposerKind::detections:
        j["detections_file"] = detections_file.string();
        break;
    case ProposerKind::grid: {
        auto cells = nlohmann::ordered_json::array();
        for (const GridCell& c : grid_cells) {
            cells.push_back({c.w, c.h});
        }
        j["grid_cells"] = cells;
        j["grid_stride_fraction"] = grid_stride_fraction;
        break;
    }
    case ProposerKind::saliency:
        j["gradient_threshold"] = gradient_threshold;
        j["min_component_area"] = min_component_area;
        break;
    }
    return j;
}

ProposerConfig ProposerConfig::from_json(const nlohmann::json& j)
{
    ProposerConfig cfg;
    try {
        cfg.kind = proposer_kind_from_string(j.at("kind").get<std::string>());
        cfg.min_score = j.value("min_score", cfg.min_score);
        cfg.nms_iou = j.value("nms_iou", cfg.nms_iou);
        cfg.detections_file = j.value("detections_file", std::string());
        if (j.contains("grid_cells")) {
            cfg.grid_cells.clear();
            for (const auto& c : j.at("grid_cells")) {
                cfg.grid_cells.push_back(GridCell{c.at(0).get<int>(), c.at(1).get<int>()});
            }
        }
        cfg.grid_stride_fraction = j.value("grid_stride_fraction", cfg.grid_stride_fraction);
        cfg.gradient_threshold = j.value("gradient_threshold", cfg.gradient_threshold);
        cfg.min_component_area = j.value("min_component_area", cfg.min_component_area);
    } catch (const nlohmann::json::exception& e) {
        throw_data_error(std::string("malformed proposer config: ") + e.what());
    }
    return cfg;
}

std::vector<Region> finalize_regions(const std::vector<Region>& raw, const Page& page, const ProposerConfig& cfg)
{
    std::vector<Region> kept;
    kept.reserve(raw.size());
    for (const Region& r : raw) {
        if (r.score < cfg.min_score) {
            continue;
        }
        const auto clipped = clip(r.bbox, page.width(), page.height());
        if (!clipped) {
            continue;
        }
        Region c = r;
        c.bbox = *clipped;
        kept.push_back(std::move(c));
    }

    std::vector<ScoredBox> boxes;
    boxes.reserve(kept.size());
    for (const Region& r : kept) {
        boxes.push_back(ScoredBox{r.bbox, r.score});
    }
    std::vector<Region> out;
    for (std::size_t i : nms_indices(boxes, cfg.nms_iou)) {
        out.push_back(kept[i]);
    }
    return out;
}

std::vector<Region> parse_detections(std::istream& in, const std::string& source)
{
    std::vector<Region> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = source + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw_data_error("malformed detection at " + where + ": not valid JSON");
        }
        auto int_field = [&](const char* key) {
            if (!j.is_object() || !j.contains(key) || !j[key].is_number_integer()) {
                throw_data_error("malformed detection at " + where + ": '" + key + "' must be an integer");
            }
            return j[key].get<int>();
        };
        if (!j.is_object() || !j.contains("page_id") || !j["page_id"].is_string()) {
            throw_data_error("malformed detection at " + where + ": 'page_id' must be a string");
        }
        if (!j.contains("score") || !j["score"].is_number()) {
            throw_data_error("malformed detection at " + where + ": 'score' must be a number");
        }
        Region r;
        r.page_id = j["page_id"].get<std::string>();
        r.bbox = BBox{int_field("x"), int_field("y"), int_field("w"), int_field("h")};
        r.score = j["score"].get<double>();
        if (j.contains("label")) {
            if (!j["label"].is_string()) {
                throw_data_error("malformed detection at " + where + ": 'label' must be a string");
            }
            r.label = j["label"].get<std::string>();
        }
        if (!r.bbox.valid()) {
            throw_data_error("malformed detection at " + where + ": w and h must be positive");
        }
        if (!std::isfinite(r.score)) {
            throw_data_error("non-finite score at " + where);
        }
        if (r.score < 0.0 || r.score > 1.0) {
            throw_data_error("score outside [0,1] at " + where);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Region> ingest_detections(const std::filesystem::path& file, const std::vector<Page>& pages,
                                      const ProposerConfig& cfg)
{
    std::ifstream in(file);
    if (!in) {
        throw_data_error("missing file: " + file.string());
    }
    const std::vector<Region> raw = parse_detections(in, file.string());

    std::map<std::string, std::size_t> page_index;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        page_index.emplace(pages[i].page_id, i);
    }
    std::vector<std::vector<Region>> grouped(pages.size());
    for (const Region& r : raw) {
        auto it = page_index.find(r.page_id);
        if (it == page_index.end()) {
            throw_data_error("detection refers to unknown page_id '" + r.page_id + "'");
        }
        grouped[it->second].push_back(r);
    }

    // Pages are sorted by page_id, so concatenating keeps the global order.
    std::vector<Region> out;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        auto kept = finalize_regions(grouped[i], pages[i], cfg);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

std::vector<Region> grid_propose(const Page& page, const ProposerConfig& cfg)
{
    std::vector<Region> raw;
    for (const GridCell& cell : cfg.grid_cells) {
        if (cell.w > page.width() || cell.h > page.height()) {
            throw_usage_error("grid cell " + std::to_string(cell.w) + "x" + std::to_string(cell.h) +
                              " exceeds page '" + page.page_id + "'");
        }
        const int stride_x = std::max(1, static_cast<int>(std::lround(cell.w * cfg.grid_stride_fraction)));
        const int stride_y = std::max(1, static_cast<int>(std::lround(cell.h * cfg.grid_stride_fraction)));
        for (int y = 0; y + cell.h <= page.height(); y += stride_y) {
            for (int x = 0; x + cell.w <= page.width(); x += stride_x) {
                raw.push_back(Region{page.page_id, BBox{x, y, cell.w, cell.h}, 1.0, "grid"});
            }
        }
    }
    return finalize_regions(raw, page, cfg);
}

namespace {

// A 3x3 Sobel kernel also fires on the outside pixel of a step edge, so a
// component overshoots the object by one pixel on every side that does not
// touch the page border.
BBox edge_extent(BBox b, int page_w, int page_h)
{
    int left = b.x;
    int top = b.y;
    int right = b.right();
    int bottom = b.bottom();
    if (left > 0) {
        ++left;
    }
    if (top > 0) {
        ++top;
    }
    if (right < page_w) {
        --right;
    }
    if (bottom < page_h) {
        --bottom;
    }
    if (right <= left || bottom <= top) {
        return b;
    }
    return BBox{left, top, right - left, bottom - top};
}

}  // namespace

std::vector<Region> saliency_propose(const Page& page, const ProposerConfig& cfg)
{
    cv::Mat gray;
    if (page.image.channels() == 3) {
        cv::cvtColor(page.image, gray, cv::COLOR_BGR2GRAY);
    } else {
        gray = page.image;
    }
    cv::Mat dx;
    cv::Mat dy;
    cv::Sobel(gray, dx, CV_32F, 1, 0, 3, 1.0, 0.0, cv::BORDER_REPLICATE);
    cv::Sobel(gray, dy, CV_32F, 0, 1, 3, 1.0, 0.0, cv::BORDER_REPLICATE);
    cv::Mat magnitude;
    cv::magnitude(dx, dy, magnitude);

    double max_magnitude = 0.0;
    cv::minMaxLoc(magnitude, nullptr, &max_magnitude);
    if (max_magnitude <= 0.0) {
        return {};
    }

    cv::Mat mask = magnitude >= cfg.gradient_threshold;
    cv::Mat labels;
    cv::Mat stats;
    cv::Mat centroids;
    const int n = cv::connectedComponentsWithStats(mask, labels, stats, centroids, 8, CV_32S);

    std::vector<BBox> boxes;
    for (int i = 1; i < n; ++i) {
        if (stats.at<int>(i, cv::CC_STAT_AREA) < cfg.min_component_area) {
            continue;
        }
        boxes.push_back(edge_extent(BBox{stats.at<int>(i, cv::CC_STAT_LEFT), stats.at<int>(i, cv::CC_STAT_TOP),
                                         stats.at<int>(i, cv::CC_STAT_WIDTH), stats.at<int>(i, cv::CC_STAT_HEIGHT)},
                                    page.width(), page.height()));
    }

    // Components nested inside another component's box (inner strokes of a
    // figure) are not separate proposals.
    std::vector<Region> raw;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const bool nested = std::any_of(boxes.begin(), boxes.end(), [&](const BBox& other) {
            return other != boxes[i] && contains(other, boxes[i]);
        });
        if (nested) {
            continue;
        }
        const BBox& b = boxes[i];
        const double mean = cv::mean(magnitude(cv::Rect(b.x, b.y, b.w, b.h)))[0];
        raw.push_back(Region{page.page_id, b, std::clamp(mean / max_magnitude, 0.0, 1.0), "saliency"});
    }
    return finalize_regions(raw, page, cfg);
}

std::vector<std::vector<Region>> propose(const std::vector<Page>& pages, const ProposerConfig& cfg, unsigned threads)
{
    cfg.validate();
    std::vector<std::vector<Region>> out(pages.size());
    if (cfg.kind == ProposerKind::detections) {
        const std::vector<Region> all = ingest_detections(cfg.detections_file, pages, cfg);
        std::map<std::string, std::size_t> page_index;
        for (std::size_t i = 0; i < pages.size(); ++i) {
            page_index.emplace(pages[i].page_id, i);
        }
        for (const Region& r : all) {
            out[page_index.at(r.page_id)].push_back(r);
        }
        return out;
    }
    parallel_for(pages.size(), threads, [&](std::size_t i) {
        out[i] = cfg.kind == ProposerKind::grid ? grid_propose(pages[i], cfg) : saliency_propose(pages[i], cfg);
    });
    return out;
}

}  // namespace idoc
