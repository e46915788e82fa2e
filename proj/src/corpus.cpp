#include "idoc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "idoc/checksum.hpp"
#include "idoc/embedding_file.hpp"
#include "idoc/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace idoc {

namespace {

ordered_json bbox_json(const BBox& b)
{
    return ordered_json::array({b.x, b.y, b.w, b.h});
}

BBox parse_bbox(const json& value, const std::string& owner)
{
    if (!value.is_array() || value.size() != 4 ||
        !std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_number_integer(); })) {
        throw_data_error("schema violation: bbox of " + owner + " must be [x,y,w,h] integers");
    }
    BBox b{value[0].get<int>(), value[1].get<int>(), value[2].get<int>(), value[3].get<int>()};
    if (!b.valid()) {
        throw_data_error("schema violation: bbox of " + owner + " has non-positive size");
    }
    return b;
}

std::string require_string(const json& obj, const char* key, const std::string& owner)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw_data_error("schema violation: " + owner + " lacks string field '" + key + "'");
    }
    return it->get<std::string>();
}

const json& require_array(const json& obj, const char* key)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) {
        throw_data_error(std::string("schema violation: ground truth lacks array '") + key + "'");
    }
    return *it;
}

bool is_image_file(const fs::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

bool same_annotations(const GroundTruth& a, const GroundTruth& b)
{
    if (a.categories != b.categories || a.occurrences != b.occurrences || a.queries.size() != b.queries.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.queries.size(); ++i) {
        const Query& p = a.queries[i];
        const Query& q = b.queries[i];
        if (p.query_id != q.query_id || p.category != q.category || p.source_page_id != q.source_page_id ||
            p.bbox != q.bbox) {
            return false;
        }
    }
    return true;
}

ordered_json groundtruth_to_json(const GroundTruth& truth)
{
    ordered_json doc;
    doc["categories"] = truth.categories;
    doc["queries"] = ordered_json::array();
    for (const Query& q : truth.queries) {
        doc["queries"].push_back(ordered_json{{"query_id", q.query_id},
                                              {"category", q.category},
                                              {"page_id", q.source_page_id},
                                              {"bbox", bbox_json(q.bbox)}});
    }
    doc["occurrences"] = ordered_json::array();
    for (const Occurrence& o : truth.occurrences) {
        doc["occurrences"].push_back(
            ordered_json{{"category", o.category}, {"page_id", o.page_id}, {"bbox", bbox_json(o.bbox)}});
    }
    return doc;
}

GroundTruth groundtruth_from_json(const json& doc)
{
    if (!doc.is_object()) {
        throw_data_error("schema violation: ground truth must be a JSON object");
    }
    GroundTruth truth;

    std::set<std::string> categories;
    for (const json& c : require_array(doc, "categories")) {
        if (!c.is_string()) {
            throw_data_error("schema violation: categories must be strings");
        }
        if (!categories.insert(c.get<std::string>()).second) {
            throw_data_error("schema violation: duplicate category '" + c.get<std::string>() + "'");
        }
    }
    truth.categories.assign(categories.begin(), categories.end());

    std::set<std::string> query_ids;
    for (const json& q : require_array(doc, "queries")) {
        Query query;
        query.query_id = require_string(q, "query_id", "query");
        const std::string owner = "query '" + query.query_id + "'";
        query.category = require_string(q, "category", owner);
        query.source_page_id = require_string(q, "page_id", owner);
        query.bbox = parse_bbox(q.value("bbox", json()), owner);
        if (!query_ids.insert(query.query_id).second) {
            throw_data_error("schema violation: duplicate query_id '" + query.query_id + "'");
        }
        if (!categories.contains(query.category)) {
            throw_data_error("schema violation: " + owner + " has unknown category '" + query.category + "'");
        }
        truth.queries.push_back(std::move(query));
    }

    std::map<std::string, std::size_t> per_category;
    for (const json& o : require_array(doc, "occurrences")) {
        Occurrence occ;
        occ.category = require_string(o, "category", "occurrence");
        occ.page_id = require_string(o, "page_id", "occurrence");
        occ.bbox = parse_bbox(o.value("bbox", json()), "occurrence on page '" + occ.page_id + "'");
        if (!categories.contains(occ.category)) {
            throw_data_error("schema violation: occurrence on page '" + occ.page_id + "' has unknown category '" +
                             occ.category + "'");
        }
        ++per_category[occ.category];
        truth.occurrences.push_back(std::move(occ));
    }

    for (const Query& q : truth.queries) {
        if (per_category[q.category] == 0) {
            throw_data_error("schema violation: query '" + q.query_id + "' has no occurrence of category '" +
                             q.category + "'");
        }
    }
    return truth;
}

GroundTruth read_groundtruth(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw_data_error("missing file: " + file.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw_data_error("malformed ground truth " + file.string() + ": " + e.what());
    }
    return groundtruth_from_json(doc);
}

void write_groundtruth(const GroundTruth& truth, const fs::path& file)
{
    if (file.has_parent_path()) {
        fs::create_directories(file.parent_path());
    }
    const std::string text = groundtruth_to_json(truth).dump(1) + "\n";
    write_file_atomic(file, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::vector<Page> load_pages(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw_data_error("missing pages directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<Page> pages;
    std::set<std::string> seen;
    for (const fs::path& file : files) {
        Page page;
        page.page_id = file.stem().string();
        if (!seen.insert(page.page_id).second) {
            throw_data_error("duplicate page_id '" + page.page_id + "' (" + file.string() + ")");
        }
        page.image = cv::imread(file.string(), cv::IMREAD_COLOR);
        if (page.image.empty()) {
            throw_data_error("undecodable image: " + file.string());
        }
        pages.push_back(std::move(page));
    }
    std::sort(pages.begin(), pages.end(), [](const Page& a, const Page& b) { return a.page_id < b.page_id; });
    return pages;
}

void resolve_queries(GroundTruth& truth, const std::vector<Page>& pages)
{
    std::map<std::string, const Page*> by_id;
    for (const Page& p : pages) {
        by_id.emplace(p.page_id, &p);
    }
    for (const Occurrence& o : truth.occurrences) {
        if (!by_id.contains(o.page_id)) {
            throw_data_error("dangling page reference: occurrence refers to unknown page '" + o.page_id + "'");
        }
    }
    for (Query& q : truth.queries) {
        auto it = by_id.find(q.source_page_id);
        if (it == by_id.end()) {
            throw_data_error("dangling page reference: query '" + q.query_id + "' refers to unknown page '" +
                             q.source_page_id + "'");
        }
        const Page& page = *it->second;
        if (q.bbox.x < 0 || q.bbox.y < 0 || q.bbox.right() > page.width() || q.bbox.bottom() > page.height()) {
            throw_data_error("query '" + q.query_id + "' bbox lies outside page '" + page.page_id + "'");
        }
        q.image = page.image(cv::Rect(q.bbox.x, q.bbox.y, q.bbox.w, q.bbox.h)).clone();
    }
}

Corpus load_corpus(const fs::path& pages_dir, const fs::path& groundtruth_file)
{
    Corpus corpus;
    corpus.truth = read_groundtruth(groundtruth_file);
    corpus.pages = load_pages(pages_dir);
    resolve_queries(corpus.truth, corpus.pages);
    return corpus;
}

void write_corpus(const Corpus& corpus, const fs::path& dir)
{
    const fs::path pages_dir = dir / "pages";
    fs::create_directories(pages_dir);
    for (const Page& page : corpus.pages) {
        const fs::path file = pages_dir / (page.page_id + ".png");
        if (!cv::imwrite(file.string(), page.image)) {
            throw_data_error("cannot write " + file.string());
        }
    }
    write_groundtruth(corpus.truth, dir / "gt.json");
}

std::string corpus_fingerprint(const std::vector<Page>& pages)
{
    std::uint32_t crc = 0;
    for (const Page& page : pages) {
        const auto* id = reinterpret_cast<const unsigned char*>(page.page_id.data());
        crc = crc32(std::span(id, page.page_id.size()), crc);
        const cv::Mat pixels = page.image.isContinuous() ? page.image : page.image.clone();
        crc = crc32(std::span(pixels.data, pixels.total() * pixels.elemSize()), crc);
    }
    return "crc32:" + hex32(crc);
}

}  // namespace idoc
