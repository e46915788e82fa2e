#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "idoc/corpus.hpp"
#include "idoc/error.hpp"

namespace fs = std::filesystem;

namespace idoc {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(trim(field));
    }
    return fields;
}

int parse_int(const std::string& text, std::size_t line_no)
{
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw_data_error("annotation line " + std::to_string(line_no) + ": '" + text + "' is not an integer");
    }
    return value;
}

}  // namespace

// Columns: type,id,category,page,x1,y1,x2,y2 with inclusive corner pixels.
// `page` may carry an image extension; the stem becomes the page_id.
GroundTruth convert_docexplore(const fs::path& annotation_csv)
{
    std::ifstream in(annotation_csv);
    if (!in) {
        throw_data_error("missing file: " + annotation_csv.string());
    }

    GroundTruth truth;
    std::set<std::string> categories;
    std::set<std::string> query_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        const auto fields = split_fields(text);
        if (line_no == 1 && !fields.empty() && fields[0] == "type") {
            continue;
        }
        if (fields.size() != 8) {
            throw_data_error("annotation line " + std::to_string(line_no) + ": expected 8 fields, got " +
                             std::to_string(fields.size()));
        }
        const int x1 = parse_int(fields[4], line_no);
        const int y1 = parse_int(fields[5], line_no);
        const int x2 = parse_int(fields[6], line_no);
        const int y2 = parse_int(fields[7], line_no);
        const BBox box{std::min(x1, x2), std::min(y1, y2), std::abs(x2 - x1) + 1, std::abs(y2 - y1) + 1};
        const std::string& category = fields[2];
        const std::string page_id = fs::path(fields[3]).stem().string();
        categories.insert(category);

        if (fields[0] == "query") {
            if (!query_ids.insert(fields[1]).second) {
                throw_data_error("annotation line " + std::to_string(line_no) + ": duplicate query id '" +
                                 fields[1] + "'");
            }
            Query q;
            q.query_id = fields[1];
            q.category = category;
            q.source_page_id = page_id;
            q.bbox = box;
            truth.queries.push_back(std::move(q));
        } else if (fields[0] == "occurrence") {
            truth.occurrences.push_back(Occurrence{category, page_id, box});
        } else {
            throw_data_error("annotation line " + std::to_string(line_no) + ": unknown type '" + fields[0] + "'");
        }
    }

    // Queries are crops of catalog pages, so each one is also an occurrence.
    for (const Query& q : truth.queries) {
        const Occurrence self{q.category, q.source_page_id, q.bbox};
        if (std::find(truth.occurrences.begin(), truth.occurrences.end(), self) == truth.occurrences.end()) {
            truth.occurrences.push_back(self);
        }
    }
    truth.categories.assign(categories.begin(), categories.end());
    return truth;
}

}  // namespace idoc
