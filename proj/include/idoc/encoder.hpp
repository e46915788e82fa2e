#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

namespace idoc {

enum class EncoderKind { color_hist, grad_hist, external };

const char* to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(const std::string& name);

/// Feature extractor configuration. Built-in extractors resize every patch
/// to canonical_size x canonical_size (bilinear) before extraction.
struct EncoderSpec {
    EncoderKind kind = EncoderKind::color_hist;
    int color_bins = 4;        // per channel; dim = bins^3
    int orientation_bins = 9;  // unsigned orientations over [0, pi)
    int spatial_cells = 2;     // cells per side; dim = bins * cells^2
    int canonical_size = 224;
    std::string external_id;   // encoder_id carried by an external embedding file
    std::uint32_t external_dim = 0;

    std::uint32_t dim() const;
    std::string encoder_id() const;
    void validate() const;

    nlohmann::ordered_json to_json() const;
    static EncoderSpec from_json(const nlohmann::json& j);
};

struct Embedding {
    std::vector<float> vector;
    std::string encoder_id;

    std::size_t dim() const noexcept { return vector.size(); }
};

/// L2-normalizes raw features; an all-zero input maps to e1.
std::vector<float> normalize_features(std::span<const double> raw);

/// Encodes an image patch (8-bit, 1 or 3 channels) with a built-in extractor.
Embedding encode(const cv::Mat& patch, const EncoderSpec& spec);

/// Cosine of two unit embeddings, clamped to [-1, 1].
double cosine(const Embedding& a, const Embedding& b);

using EmbeddingMap = std::unordered_map<std::string, Embedding>;

/// Reads an embedding file into an id -> embedding map.
EmbeddingMap load_embeddings(const std::filesystem::path& file, std::uint32_t expected_dim = 0);

}  // namespace idoc
