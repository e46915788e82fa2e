#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "idoc/corpus.hpp"
#include "idoc/encoder.hpp"
#include "idoc/proposer.hpp"

namespace idoc {

struct IndexManifest {
    int format_version = 1;
    std::string engine_version;
    EncoderSpec encoder;
    nlohmann::ordered_json proposer;  // ProposerConfig::to_json(), or a profile description
    std::string corpus_id;
    std::string build_timestamp;
    std::uint32_t dim = 0;
    std::uint64_t region_count = 0;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();  // resolved run configuration

    nlohmann::ordered_json to_json() const;
    /// Keeps the key order of nested objects, so a reloaded manifest re-serializes identically.
    static IndexManifest from_json(const nlohmann::ordered_json& j);
};

/// Immutable region set plus a dense dimension-major matrix of unit vectors.
class SearchIndex {
public:
    SearchIndex() = default;

    /// `vectors` is record-major (region i occupies [i*dim, (i+1)*dim)).
    /// Regions must be grouped by page in ascending page_id order.
    SearchIndex(IndexManifest manifest, std::vector<Region> regions, std::span<const float> vectors);

    const IndexManifest& manifest() const noexcept { return manifest_; }
    const std::string& encoder_id() const noexcept { return encoder_id_; }
    std::uint32_t dim() const noexcept { return manifest_.dim; }
    std::size_t size() const noexcept { return regions_.size(); }

    std::span<const Region> regions() const noexcept { return regions_; }
    const Region& region(std::size_t i) const { return regions_[i]; }
    /// Position of region i within its page.
    std::size_t region_index(std::size_t i) const { return region_index_[i]; }
    std::size_t page_ordinal(std::size_t i) const { return page_ordinal_[i]; }
    std::size_t page_count() const noexcept { return page_count_; }

    /// Dimension-major matrix: component d of region i sits at d*size()+i.
    std::span<const float> matrix() const noexcept { return matrix_; }
    std::vector<float> vector(std::size_t i) const;
    /// Record-major copy of all vectors.
    std::vector<float> record_major() const;

    bool operator==(const SearchIndex& other) const;

private:
    IndexManifest manifest_;
    std::string encoder_id_;
    std::vector<Region> regions_;
    std::vector<std::size_t> region_index_;
    std::vector<std::size_t> page_ordinal_;
    std::size_t page_count_ = 0;
    std::vector<float> matrix_;
};

struct BuildOptions {
    unsigned threads = 1;
    std::string build_timestamp = "1970-01-01T00:00:00Z";
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// Proposes, encodes and packs regions. With an external encoder, every
/// region id "<page_id>#<idx>" must be present in `external`.
SearchIndex build_index(const std::vector<Page>& pages, const ProposerConfig& proposer, const EncoderSpec& encoder,
                        const EmbeddingMap* external = nullptr, const BuildOptions& options = {});

struct RankedHit {
    Region region;
    std::size_t index = 0;  // position in the index
    double similarity = 0.0;
    int rank = 0;
};

struct SearchOptions {
    std::size_t top_k = 1000;
    std::optional<double> result_nms_iou;
    bool allow_encoder_mismatch = false;
};

/// Exact scan: cosine against every stored vector, descending similarity
/// with index order breaking ties. With result_nms_iou set, per-page NMS on
/// similarity runs over the ranked list before truncation to top_k.
std::vector<RankedHit> search(const SearchIndex& index, const Embedding& query, const SearchOptions& options);

struct BatchTiming {
    std::size_t queries = 0;
    std::size_t regions = 0;
    std::uint64_t comparisons = 0;
    double total_ms = 0.0;
    double mean_ms = 0.0;
};

struct BatchResult {
    std::vector<std::vector<RankedHit>> results;
    BatchTiming timing;
};

BatchResult search_batch(const SearchIndex& index, std::span<const Embedding> queries, const SearchOptions& options,
                         unsigned threads = 1);

/// Writes manifest.json, regions.jsonl, vectors.bin and checksum into dir.
void persist(const SearchIndex& index, const std::filesystem::path& dir);
SearchIndex load_index(const std::filesystem::path& dir);

}  // namespace idoc
