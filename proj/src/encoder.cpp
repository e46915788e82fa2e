#include "idoc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/imgproc.hpp>

#include "idoc/embedding_file.hpp"
#include "idoc/error.hpp"
#include "idoc/similarity.hpp"

namespace idoc {

const char* to_string(EncoderKind kind)
{
    switch (kind) {
    case EncoderKind::color_hist:
        return "color-hist";
    case EncoderKind::grad_hist:
        return "grad-hist";
    case EncoderKind::external:
        return "external";
    }
    return "?";
}

EncoderKind encoder_kind_from_string(const std::string& name)
{
    if (name == "color-hist") {
        return EncoderKind::color_hist;
    }
    if (name == "grad-hist") {
        return EncoderKind::grad_hist;
    }
    if (name == "external") {
        return EncoderKind::external;
    }
    throw_usage_error("unknown encoder '" + name + "' (color-hist|grad-hist|external)");
}

std::uint32_t EncoderSpec::dim() const
{
    switch (kind) {
    case EncoderKind::color_hist:
        return static_cast<std::uint32_t>(color_bins * color_bins * color_bins);
    case EncoderKind::grad_hist:
        return static_cast<std::uint32_t>(orientation_bins * spatial_cells * spatial_cells);
    case EncoderKind::external:
        return external_dim;
    }
    return 0;
}

std::string EncoderSpec::encoder_id() const
{
    switch (kind) {
    case EncoderKind::color_hist:
        return "color-hist:b" + std::to_string(color_bins) + ":s" + std::to_string(canonical_size);
    case EncoderKind::grad_hist:
        return "grad-hist:o" + std::to_string(orientation_bins) + ":c" + std::to_string(spatial_cells) + ":s" +
               std::to_string(canonical_size);
    case EncoderKind::external:
        return external_id;
    }
    return {};
}

void EncoderSpec::validate() const
{
    if (kind == EncoderKind::color_hist && (color_bins < 1 || color_bins > 64)) {
        throw_usage_error("color-hist bins must lie in [1,64]");
    }
    if (kind == EncoderKind::grad_hist && (orientation_bins < 1 || spatial_cells < 1)) {
        throw_usage_error("grad-hist needs >= 1 orientation bin and >= 1 cell");
    }
    if (kind != EncoderKind::external && canonical_size < 1) {
        throw_usage_error("canonical patch size must be positive");
    }
    if (kind == EncoderKind::grad_hist && spatial_cells > canonical_size) {
        throw_usage_error("grad-hist cells exceed the canonical patch size");
    }
}

nlohmann::ordered_json EncoderSpec::to_json() const
{
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind);
    j["encoder_id"] = encoder_id();
    j["dim"] = dim();
    switch (kind) {
    case EncoderKind::color_hist:
        j["bins"] = color_bins;
        j["canonical_size"] = canonical_size;
        break;
    case EncoderKind::grad_hist:
        j["orientation_bins"] = orientation_bins;
        j["cells"] = spatial_cells;
        j["canonical_size"] = canonical_size;
        break;
    case EncoderKind::external:
        break;
    }
    return j;
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j)
{
    EncoderSpec spec;
    try {
        spec.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
        spec.color_bins = j.value("bins", spec.color_bins);
        spec.orientation_bins = j.value("orientation_bins", spec.orientation_bins);
        spec.spatial_cells = j.value("cells", spec.spatial_cells);
        spec.canonical_size = j.value("canonical_size", spec.canonical_size);
        if (spec.kind == EncoderKind::external) {
            spec.external_id = j.at("encoder_id").get<std::string>();
            spec.external_dim = j.at("dim").get<std::uint32_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw_data_error(std::string("malformed encoder spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

std::vector<float> normalize_features(std::span<const double> raw)
{
    if (raw.empty()) {
        throw Error(ErrorKind::internal, "cannot normalize an empty feature vector");
    }
    double sq = 0.0;
    for (double v : raw) {
        sq += v * v;
    }
    std::vector<float> out(raw.size(), 0.0f);
    if (sq == 0.0) {
        out[0] = 1.0f;
        return out;
    }
    const double norm = std::sqrt(sq);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = static_cast<float>(raw[i] / norm);
    }
    return out;
}

namespace {

cv::Mat canonical_patch(const cv::Mat& patch, int size)
{
    cv::Mat bgr;
    if (patch.channels() == 1) {
        cv::cvtColor(patch, bgr, cv::COLOR_GRAY2BGR);
    } else if (patch.channels() == 4) {
        cv::cvtColor(patch, bgr, cv::COLOR_BGRA2BGR);
    } else {
        bgr = patch;
    }
    if (bgr.depth() != CV_8U || bgr.channels() != 3) {
        throw_data_error("encoder expects 8-bit images");
    }
    if (bgr.cols == size && bgr.rows == size) {
        return bgr;
    }
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
    return resized;
}

std::vector<double> color_histogram(const cv::Mat& img, int bins)
{
    std::vector<double> hist(static_cast<std::size_t>(bins * bins * bins), 0.0);
    for (int y = 0; y < img.rows; ++y) {
        const auto* row = img.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.cols; ++x) {
            const int b0 = row[x][0] * bins / 256;
            const int b1 = row[x][1] * bins / 256;
            const int b2 = row[x][2] * bins / 256;
            hist[static_cast<std::size_t>((b0 * bins + b1) * bins + b2)] += 1.0;
        }
    }
    return hist;
}

std::vector<double> gradient_histogram(const cv::Mat& img, int orientation_bins, int cells)
{
    cv::Mat gray;
    cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY);
    cv::Mat dx;
    cv::Mat dy;
    cv::Sobel(gray, dx, CV_32F, 1, 0, 3, 1.0, 0.0, cv::BORDER_REPLICATE);
    cv::Sobel(gray, dy, CV_32F, 0, 1, 3, 1.0, 0.0, cv::BORDER_REPLICATE);

    std::vector<double> hist(static_cast<std::size_t>(orientation_bins * cells * cells), 0.0);
    for (int y = 0; y < img.rows; ++y) {
        const float* gx = dx.ptr<float>(y);
        const float* gy = dy.ptr<float>(y);
        const int cy = y * cells / img.rows;
        for (int x = 0; x < img.cols; ++x) {
            const double mag = std::hypot(static_cast<double>(gx[x]), static_cast<double>(gy[x]));
            if (mag == 0.0) {
                continue;
            }
            double angle = std::atan2(static_cast<double>(gy[x]), static_cast<double>(gx[x]));
            if (angle < 0.0) {
                angle += std::numbers::pi;
            }
            const int bin = std::min(orientation_bins - 1, static_cast<int>(angle / std::numbers::pi * orientation_bins));
            const int cx = x * cells / img.cols;
            hist[static_cast<std::size_t>((cy * cells + cx) * orientation_bins + bin)] += mag;
        }
    }
    return hist;
}

}  // namespace

Embedding encode(const cv::Mat& patch, const EncoderSpec& spec)
{
    if (spec.kind == EncoderKind::external) {
        throw_usage_error("external encoders provide embeddings through an embedding file, not encode()");
    }
    if (patch.empty() || patch.cols <= 0 || patch.rows <= 0) {
        throw_data_error("cannot encode a zero-area patch");
    }
    spec.validate();
    const cv::Mat img = canonical_patch(patch, spec.canonical_size);
    const std::vector<double> raw = spec.kind == EncoderKind::color_hist
                                        ? color_histogram(img, spec.color_bins)
                                        : gradient_histogram(img, spec.orientation_bins, spec.spatial_cells);
    return Embedding{normalize_features(raw), spec.encoder_id()};
}

double cosine(const Embedding& a, const Embedding& b)
{
    if (a.dim() != b.dim()) {
        throw_data_error("embedding dim mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
    if (a.encoder_id != b.encoder_id) {
        throw_data_error("encoder mismatch: '" + a.encoder_id + "' vs '" + b.encoder_id + "'");
    }
    return std::clamp(dot(a.vector, b.vector), -1.0, 1.0);
}

EmbeddingMap load_embeddings(const std::filesystem::path& file, std::uint32_t expected_dim)
{
    const EmbeddingFile parsed =
        read_embedding_file(file, expected_dim == 0 ? std::nullopt : std::optional<std::uint32_t>(expected_dim));
    EmbeddingMap map;
    map.reserve(parsed.count());
    for (std::size_t i = 0; i < parsed.count(); ++i) {
        const auto v = parsed.vector(i);
        map.emplace(parsed.ids[i], Embedding{std::vector<float>(v.begin(), v.end()), parsed.encoder_id});
    }
    return map;
}

}  // namespace idoc
