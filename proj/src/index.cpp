#include "idoc/index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "idoc/checksum.hpp"
#include "idoc/embedding_file.hpp"
#include "idoc/error.hpp"
#include "idoc/parallel.hpp"
#include "idoc/similarity.hpp"
#include "idoc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace idoc {

// ---------------------------------------------------------------------------
// Manifest

ordered_json IndexManifest::to_json() const
{
    ordered_json j;
    j["format"] = kIndexFormatName;
    j["format_version"] = format_version;
    j["engine_version"] = engine_version;
    j["corpus_id"] = corpus_id;
    j["build_timestamp"] = build_timestamp;
    j["dim"] = dim;
    j["region_count"] = region_count;
    j["encoder"] = encoder.to_json();
    j["proposer"] = proposer;
    j["config"] = config;
    return j;
}

IndexManifest IndexManifest::from_json(const ordered_json& j)
{
    IndexManifest m;
    try {
        if (j.at("format").get<std::string>() != kIndexFormatName) {
            throw_data_error("index manifest has unknown format '" + j.at("format").get<std::string>() + "'");
        }
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != kIndexFormatVersion) {
            throw_data_error("index format version mismatch: manifest has " + std::to_string(m.format_version) +
                             ", engine reads " + std::to_string(kIndexFormatVersion));
        }
        m.engine_version = j.at("engine_version").get<std::string>();
        m.corpus_id = j.at("corpus_id").get<std::string>();
        m.build_timestamp = j.at("build_timestamp").get<std::string>();
        m.dim = j.at("dim").get<std::uint32_t>();
        m.region_count = j.at("region_count").get<std::uint64_t>();
        m.encoder = EncoderSpec::from_json(json::parse(j.at("encoder").dump()));
        m.proposer = j.at("proposer");
        m.config = j.value("config", ordered_json::object());
    } catch (const nlohmann::json::exception& e) {
        throw_data_error(std::string("malformed index manifest: ") + e.what());
    }
    return m;
}

// ---------------------------------------------------------------------------
// SearchIndex

SearchIndex::SearchIndex(IndexManifest manifest, std::vector<Region> regions, std::span<const float> vectors)
    : manifest_(std::move(manifest)), regions_(std::move(regions))
{
    const std::size_t n = regions_.size();
    const std::size_t dim = manifest_.dim;
    if (dim == 0) {
        throw Error(ErrorKind::internal, "index dim must be positive");
    }
    if (vectors.size() != n * dim) {
        throw Error(ErrorKind::internal, "index vectors do not match region count x dim");
    }
    manifest_.region_count = n;
    encoder_id_ = manifest_.encoder.encoder_id();

    region_index_.resize(n);
    page_ordinal_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && regions_[i].page_id != regions_[i - 1].page_id) {
            if (regions_[i].page_id < regions_[i - 1].page_id) {
                throw Error(ErrorKind::internal, "index regions are not grouped in page order");
            }
            ++page_count_;
        }
        const bool new_page = i == 0 || regions_[i].page_id != regions_[i - 1].page_id;
        region_index_[i] = new_page ? 0 : region_index_[i - 1] + 1;
        page_ordinal_[i] = page_count_;
    }
    if (n > 0) {
        ++page_count_;
    }

    matrix_.resize(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const float> v = vectors.subspan(i * dim, dim);
        const double norm = std::sqrt(dot(v, v));
        if (!(std::abs(norm - 1.0) <= 1e-6)) {
            throw_data_error("index vector " + region_id(regions_[i].page_id, region_index_[i]) + " has norm " +
                             std::to_string(norm));
        }
        for (std::size_t d = 0; d < dim; ++d) {
            matrix_[d * n + i] = v[d];
        }
    }
}

std::vector<float> SearchIndex::vector(std::size_t i) const
{
    const std::size_t n = size();
    std::vector<float> out(dim());
    for (std::size_t d = 0; d < out.size(); ++d) {
        out[d] = matrix_[d * n + i];
    }
    return out;
}

std::vector<float> SearchIndex::record_major() const
{
    const std::size_t n = size();
    const std::size_t d_count = dim();
    std::vector<float> out(n * d_count);
    for (std::size_t d = 0; d < d_count; ++d) {
        const float* row = matrix_.data() + d * n;
        for (std::size_t i = 0; i < n; ++i) {
            out[i * d_count + d] = row[i];
        }
    }
    return out;
}

bool SearchIndex::operator==(const SearchIndex& other) const
{
    return manifest_.to_json() == other.manifest_.to_json() && regions_ == other.regions_ &&
           matrix_ == other.matrix_;
}

// ---------------------------------------------------------------------------
// Build

SearchIndex build_index(const std::vector<Page>& pages, const ProposerConfig& proposer, const EncoderSpec& encoder,
                        const EmbeddingMap* external, const BuildOptions& options)
{
    if (pages.empty()) {
        throw_data_error("cannot build an index over an empty corpus");
    }
    proposer.validate();

    EncoderSpec spec = encoder;
    if (spec.kind == EncoderKind::external) {
        if (external == nullptr || external->empty()) {
            throw_usage_error("an external encoder needs a non-empty embedding file");
        }
        const Embedding& any = external->begin()->second;
        spec.external_id = any.encoder_id;
        spec.external_dim = static_cast<std::uint32_t>(any.dim());
        for (const auto& [id, e] : *external) {
            if (e.encoder_id != spec.external_id || e.dim() != spec.external_dim) {
                throw_data_error("embedding file mixes encoders: '" + e.encoder_id + "' and '" + spec.external_id +
                                 "'");
            }
        }
    }
    spec.validate();
    const std::uint32_t dim = spec.dim();

    const std::vector<std::vector<Region>> per_page = propose(pages, proposer, options.threads);

    std::vector<std::vector<float>> per_page_vectors(pages.size());
    parallel_for(pages.size(), options.threads, [&](std::size_t p) {
        const std::vector<Region>& regions = per_page[p];
        std::vector<float>& out = per_page_vectors[p];
        out.reserve(regions.size() * dim);
        for (std::size_t r = 0; r < regions.size(); ++r) {
            if (spec.kind == EncoderKind::external) {
                const std::string id = region_id(pages[p].page_id, r);
                auto it = external->find(id);
                if (it == external->end()) {
                    throw_data_error("missing external embedding for region '" + id + "'");
                }
                out.insert(out.end(), it->second.vector.begin(), it->second.vector.end());
            } else {
                const BBox& b = regions[r].bbox;
                const Embedding e = encode(pages[p].image(cv::Rect(b.x, b.y, b.w, b.h)), spec);
                out.insert(out.end(), e.vector.begin(), e.vector.end());
            }
        }
    });

    std::vector<Region> regions;
    std::vector<float> vectors;
    for (std::size_t p = 0; p < pages.size(); ++p) {
        regions.insert(regions.end(), per_page[p].begin(), per_page[p].end());
        vectors.insert(vectors.end(), per_page_vectors[p].begin(), per_page_vectors[p].end());
    }

    IndexManifest manifest;
    manifest.format_version = kIndexFormatVersion;
    manifest.engine_version = kEngineVersion;
    manifest.encoder = spec;
    manifest.proposer = proposer.to_json();
    manifest.corpus_id = corpus_fingerprint(pages);
    manifest.build_timestamp = options.build_timestamp;
    manifest.dim = dim;
    manifest.config = options.config;
    return SearchIndex(std::move(manifest), std::move(regions), vectors);
}

// ---------------------------------------------------------------------------
// Search

namespace {

void check_query(const SearchIndex& index, const Embedding& query, const SearchOptions& options)
{
    if (query.dim() != index.dim()) {
        throw_data_error("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                         std::to_string(index.dim()));
    }
    if (query.encoder_id != index.encoder_id() && !options.allow_encoder_mismatch) {
        throw_data_error("encoder mismatch: query encoded with '" + query.encoder_id + "', index built with '" +
                         index.encoder_id() + "'");
    }
    if (options.top_k < 1) {
        throw_usage_error("top_k must be >= 1");
    }
    if (options.result_nms_iou && !(*options.result_nms_iou >= 0.0 && *options.result_nms_iou <= 1.0)) {
        throw_usage_error("result NMS iou must lie in [0,1]");
    }
}

}  // namespace

std::vector<RankedHit> search(const SearchIndex& index, const Embedding& query, const SearchOptions& options)
{
    check_query(index, query, options);
    const std::size_t n = index.size();
    std::vector<double> sims(n);
    scan_similarities(index.matrix(), n, query.vector, sims);
    for (double& s : sims) {
        s = std::clamp(s, -1.0, 1.0);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto ranked_before = [&](std::size_t a, std::size_t b) {
        return sims[a] != sims[b] ? sims[a] > sims[b] : a < b;
    };

    std::vector<std::size_t> chosen;
    if (!options.result_nms_iou) {
        const std::size_t k = std::min(options.top_k, n);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), ranked_before);
        chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
        // Greedy NMS decisions depend only on higher-ranked kept hits, so
        // stopping at top_k kept hits equals suppress-then-truncate.
        std::sort(order.begin(), order.end(), ranked_before);
        const double threshold = *options.result_nms_iou;
        std::vector<std::vector<std::size_t>> kept_on_page(index.page_count());
        for (std::size_t i : order) {
            if (chosen.size() == options.top_k) {
                break;
            }
            auto& kept = kept_on_page[index.page_ordinal(i)];
            const BBox& box = index.region(i).bbox;
            const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
                return iou(index.region(k).bbox, box) > threshold;
            });
            if (!suppressed) {
                kept.push_back(i);
                chosen.push_back(i);
            }
        }
    }

    std::vector<RankedHit> hits;
    hits.reserve(chosen.size());
    for (std::size_t r = 0; r < chosen.size(); ++r) {
        const std::size_t i = chosen[r];
        hits.push_back(RankedHit{index.region(i), i, sims[i], static_cast<int>(r + 1)});
    }
    return hits;
}

BatchResult search_batch(const SearchIndex& index, std::span<const Embedding> queries, const SearchOptions& options,
                         unsigned threads)
{
    for (const Embedding& q : queries) {
        check_query(index, q, options);
    }
    BatchResult out;
    out.results.resize(queries.size());
    const auto start = std::chrono::steady_clock::now();
    parallel_for(queries.size(), threads, [&](std::size_t i) { out.results[i] = search(index, queries[i], options); });
    const auto stop = std::chrono::steady_clock::now();

    out.timing.queries = queries.size();
    out.timing.regions = index.size();
    out.timing.comparisons = static_cast<std::uint64_t>(queries.size()) * index.size();
    out.timing.total_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    out.timing.mean_ms = queries.empty() ? 0.0 : out.timing.total_ms / static_cast<double>(queries.size());
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kRegionsFile = "regions.jsonl";
constexpr const char* kVectorsFile = "vectors.bin";
constexpr const char* kChecksumFile = "checksum";

std::vector<unsigned char> to_bytes(const std::string& s)
{
    return {s.begin(), s.end()};
}

std::string regions_jsonl(const SearchIndex& index)
{
    std::string out;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const Region& r = index.region(i);
        ordered_json j{{"page_id", r.page_id}, {"x", r.bbox.x},   {"y", r.bbox.y},
                       {"w", r.bbox.w},         {"h", r.bbox.h},   {"score", r.score},
                       {"label", r.label},      {"region_index", index.region_index(i)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Region> parse_regions_jsonl(const std::string& text, const std::string& source,
                                        std::vector<std::size_t>& region_indices)
{
    std::istringstream in(text);
    std::vector<Region> regions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        try {
            const json j = json::parse(line);
            Region r;
            r.page_id = j.at("page_id").get<std::string>();
            r.bbox = BBox{j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
            r.score = j.at("score").get<double>();
            r.label = j.at("label").get<std::string>();
            region_indices.push_back(j.at("region_index").get<std::size_t>());
            regions.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw_data_error(source + ":" + std::to_string(line_no) + ": malformed region: " + e.what());
        }
    }
    return regions;
}

}  // namespace

void persist(const SearchIndex& index, const fs::path& dir)
{
    fs::create_directories(dir);

    EmbeddingFile vectors;
    vectors.encoder_id = index.encoder_id();
    vectors.dim = index.dim();
    vectors.data = index.record_major();
    vectors.ids.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        vectors.ids.push_back(region_id(index.region(i).page_id, index.region_index(i)));
    }
    const std::vector<unsigned char> vector_bytes = encode_embedding_file(vectors);
    const std::vector<unsigned char> region_bytes = to_bytes(regions_jsonl(index));
    const std::vector<unsigned char> manifest_bytes = to_bytes(index.manifest().to_json().dump(2) + "\n");
    const std::string checksum = std::string(kManifestFile) + " crc32:" + hex32(crc32(manifest_bytes)) + "\n" +
                                 kRegionsFile + " crc32:" + hex32(crc32(region_bytes)) + "\n" + kVectorsFile +
                                 " crc32:" + hex32(crc32(vector_bytes)) + "\n";

    write_file_atomic(dir / kVectorsFile, vector_bytes);
    write_file_atomic(dir / kRegionsFile, region_bytes);
    write_file_atomic(dir / kManifestFile, manifest_bytes);
    write_file_atomic(dir / kChecksumFile, to_bytes(checksum));
}

SearchIndex load_index(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw_data_error("missing index directory: " + dir.string());
    }

    const std::vector<unsigned char> manifest_bytes = read_file_bytes(dir / kManifestFile);
    IndexManifest manifest;
    try {
        manifest = IndexManifest::from_json(ordered_json::parse(manifest_bytes.begin(), manifest_bytes.end()));
    } catch (const json::parse_error& e) {
        throw_data_error("malformed index manifest: " + std::string(e.what()));
    }

    const std::vector<unsigned char> region_bytes = read_file_bytes(dir / kRegionsFile);
    const std::vector<unsigned char> vector_bytes = read_file_bytes(dir / kVectorsFile);

    // Data files are verified before they are parsed. The manifest is
    // verified last, so that a manifest contradicting the data is reported
    // by content rather than by checksum.
    const std::vector<unsigned char> checksum_bytes = read_file_bytes(dir / kChecksumFile);
    std::istringstream checksums(std::string(checksum_bytes.begin(), checksum_bytes.end()));
    std::map<std::string, std::string> recorded;
    std::string name;
    std::string value;
    while (checksums >> name >> value) {
        if (name != kManifestFile && name != kRegionsFile && name != kVectorsFile) {
            throw_data_error("checksum file lists unknown entry '" + name + "'");
        }
        recorded[name] = value;
    }
    if (recorded.size() != 3) {
        throw_data_error("checksum file in " + dir.string() + " must list manifest.json, regions.jsonl and vectors.bin");
    }
    auto verify = [&](const char* file, const std::vector<unsigned char>& bytes) {
        const std::string actual = "crc32:" + hex32(crc32(bytes));
        if (recorded[file] != actual) {
            throw_data_error("checksum mismatch for " + (dir / file).string() + ": recorded " + recorded[file] +
                             ", computed " + actual);
        }
    };
    verify(kRegionsFile, region_bytes);
    verify(kVectorsFile, vector_bytes);

    const EmbeddingFile vectors = decode_embedding_file(vector_bytes, (dir / kVectorsFile).string());
    if (vectors.dim != manifest.dim) {
        throw_data_error("manifest dim " + std::to_string(manifest.dim) + " does not match vectors.bin dim " +
                         std::to_string(vectors.dim));
    }
    if (vectors.encoder_id != manifest.encoder.encoder_id()) {
        throw_data_error("manifest encoder '" + manifest.encoder.encoder_id() + "' does not match vectors.bin encoder '" +
                         vectors.encoder_id + "'");
    }

    verify(kManifestFile, manifest_bytes);

    std::vector<std::size_t> region_indices;
    std::vector<Region> regions = parse_regions_jsonl(std::string(region_bytes.begin(), region_bytes.end()),
                                                      (dir / kRegionsFile).string(), region_indices);
    if (regions.size() != vectors.count() || regions.size() != manifest.region_count) {
        throw_data_error("index count disagreement: manifest " + std::to_string(manifest.region_count) +
                         ", regions.jsonl " + std::to_string(regions.size()) + ", vectors.bin " +
                         std::to_string(vectors.count()));
    }
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const std::string expected = region_id(regions[i].page_id, region_indices[i]);
        if (vectors.ids[i] != expected) {
            throw_data_error("vectors.bin record " + std::to_string(i) + " is '" + vectors.ids[i] + "', expected '" +
                             expected + "'");
        }
    }

    SearchIndex index(std::move(manifest), std::move(regions), vectors.data);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index.region_index(i) != region_indices[i]) {
            throw_data_error("regions.jsonl region_index out of sequence at line " + std::to_string(i + 1));
        }
    }
    return index;
}

}  // namespace idoc
