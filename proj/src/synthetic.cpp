#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <opencv2/imgproc.hpp>

#include "idoc/corpus.hpp"
#include "idoc/error.hpp"

namespace idoc {

namespace {

// Raw engine output is specified by the standard, unlike the distribution
// classes, so corpora are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    int uniform_int(int lo, int hi)  // inclusive
    {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    double uniform_real(double lo, double hi)
    {
        const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + unit * (hi - lo);
    }

private:
    std::mt19937_64 engine_;
};

constexpr std::array<int, 4> kLevels{32, 96, 160, 224};
const cv::Vec3b kBackground{170, 205, 225};
const cv::Vec3b kFrame{20, 20, 20};
constexpr int kEdgeMargin = 4;  // keeps the gradient ring around a glyph on the page
constexpr int kGap = 6;         // minimum spacing between stamps
constexpr int kMaxRetries = 2000;

int level_bin(int v)
{
    return v / 64;
}

std::vector<cv::Vec3b> glyph_palette(Rng& rng)
{
    std::vector<cv::Vec3b> palette;
    for (int b : kLevels) {
        for (int g : kLevels) {
            for (int r : kLevels) {
                const bool like_frame = level_bin(b) == 0 && level_bin(g) == 0 && level_bin(r) == 0;
                const bool like_background = level_bin(b) == level_bin(kBackground[0]) &&
                                             level_bin(g) == level_bin(kBackground[1]) &&
                                             level_bin(r) == level_bin(kBackground[2]);
                if (!like_frame && !like_background) {
                    palette.emplace_back(b, g, r);
                }
            }
        }
    }
    for (std::size_t i = palette.size() - 1; i > 0; --i) {
        std::swap(palette[i], palette[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    }
    return palette;
}

struct GlyphStyle {
    cv::Vec3b fill;
    cv::Vec3b mark;
    int shape = 0;
    int base_w = 0;
    int base_h = 0;
};

void draw_glyph(cv::Mat& page, const BBox& box, const GlyphStyle& style)
{
    cv::Mat roi = page(cv::Rect(box.x, box.y, box.w, box.h));
    roi.setTo(cv::Scalar(kFrame[0], kFrame[1], kFrame[2]));

    const int frame = std::max(2, static_cast<int>(std::lround(std::min(box.w, box.h) * 0.06)));
    const cv::Rect inner(frame, frame, box.w - 2 * frame, box.h - 2 * frame);
    if (inner.width <= 0 || inner.height <= 0) {
        return;
    }
    roi(inner).setTo(cv::Scalar(style.fill[0], style.fill[1], style.fill[2]));

    const cv::Scalar mark(style.mark[0], style.mark[1], style.mark[2]);
    const int pad_x = std::max(1, inner.width / 6);
    const int pad_y = std::max(1, inner.height / 6);
    const int left = inner.x + pad_x;
    const int top = inner.y + pad_y;
    const int right = inner.x + inner.width - 1 - pad_x;
    const int bottom = inner.y + inner.height - 1 - pad_y;
    if (right <= left || bottom <= top) {
        return;
    }
    const cv::Point center((left + right) / 2, (top + bottom) / 2);

    switch (style.shape % 4) {
    case 0:
        cv::ellipse(roi, center, cv::Size((right - left) / 2, (bottom - top) / 2), 0, 0, 360, mark, cv::FILLED,
                    cv::LINE_8);
        break;
    case 1: {
        const std::array<cv::Point, 3> tri{cv::Point(center.x, top), cv::Point(right, bottom), cv::Point(left, bottom)};
        cv::fillConvexPoly(roi, tri.data(), 3, mark, cv::LINE_8);
        break;
    }
    case 2: {
        const int arm_w = std::max(1, (right - left) / 3);
        const int arm_h = std::max(1, (bottom - top) / 3);
        cv::rectangle(roi, cv::Point(center.x - arm_w / 2, top), cv::Point(center.x + arm_w / 2, bottom), mark,
                      cv::FILLED, cv::LINE_8);
        cv::rectangle(roi, cv::Point(left, center.y - arm_h / 2), cv::Point(right, center.y + arm_h / 2), mark,
                      cv::FILLED, cv::LINE_8);
        break;
    }
    default: {
        const std::array<cv::Point, 4> diamond{cv::Point(center.x, top), cv::Point(right, center.y),
                                               cv::Point(center.x, bottom), cv::Point(left, center.y)};
        cv::fillConvexPoly(roi, diamond.data(), 4, mark, cv::LINE_8);
        break;
    }
    }
}

cv::Mat textured_background(int width, int height, Rng& rng)
{
    cv::Mat page(height, width, CV_8UC3);
    const double phase_x = rng.uniform_real(0.0, 6.283185307179586);
    const double phase_y = rng.uniform_real(0.0, 6.283185307179586);
    for (int y = 0; y < height; ++y) {
        auto* row = page.ptr<cv::Vec3b>(y);
        for (int x = 0; x < width; ++x) {
            const double wave = 5.0 * std::sin(x * 0.013 + phase_x) * std::cos(y * 0.009 + phase_y);
            for (int c = 0; c < 3; ++c) {
                const int noise = rng.uniform_int(-6, 6);
                const long v = std::lround(kBackground[c] + wave) + noise;
                row[x][c] = static_cast<unsigned char>(std::clamp<long>(v, 0, 255));
            }
        }
    }
    return page;
}

BBox expanded(const BBox& b, int by)
{
    return BBox{b.x - by, b.y - by, b.w + 2 * by, b.h + 2 * by};
}

int digits(int n)
{
    return n < 10 ? 1 : 1 + digits(n / 10);
}

std::string numbered(const char* prefix, int value, int width)
{
    std::string digits_text = std::to_string(value);
    if (static_cast<int>(digits_text.size()) < width) {
        digits_text.insert(0, static_cast<std::size_t>(width) - digits_text.size(), '0');
    }
    return prefix + digits_text;
}

}  // namespace

Corpus generate_synthetic(const SynthParams& params)
{
    if (params.pages < 1 || params.categories < 1 || params.occurrences_per_category < 1) {
        throw_usage_error("synthetic corpus counts must all be >= 1");
    }
    if (params.page_width < 16 || params.page_height < 16) {
        throw_usage_error("synthetic pages must be at least 16x16");
    }

    Rng rng(params.seed);
    const std::vector<cv::Vec3b> palette = glyph_palette(rng);

    std::vector<GlyphStyle> styles;
    for (int c = 0; c < params.categories; ++c) {
        GlyphStyle style;
        style.fill = palette[(2 * c) % palette.size()];
        style.mark = palette[(2 * c + 1) % palette.size()];
        style.shape = c;
        style.base_w = rng.uniform_int(40, 90);
        style.base_h = rng.uniform_int(30, 90);
        styles.push_back(style);
    }

    Corpus corpus;
    const int page_digits = std::max(4, digits(params.pages - 1));
    for (int p = 0; p < params.pages; ++p) {
        cv::Mat image = textured_background(params.page_width, params.page_height, rng);
        corpus.pages.push_back(Page{numbered("page", p, page_digits), std::move(image)});
    }

    std::vector<std::vector<BBox>> placed(params.pages);
    GroundTruth& truth = corpus.truth;
    for (int c = 0; c < params.categories; ++c) {
        const std::string category = numbered("cat", c, std::max(2, digits(params.categories - 1)));
        truth.categories.push_back(category);
        const GlyphStyle& style = styles[c];

        for (int k = 0; k < params.occurrences_per_category; ++k) {
            const double scale = rng.uniform_real(0.5, 2.0);
            const int w = std::max(8, static_cast<int>(std::lround(style.base_w * scale)));
            const int h = std::max(8, static_cast<int>(std::lround(style.base_h * scale)));
            const int max_x = params.page_width - w - kEdgeMargin;
            const int max_y = params.page_height - h - kEdgeMargin;
            if (max_x < kEdgeMargin || max_y < kEdgeMargin) {
                throw_data_error("cannot place a " + std::to_string(w) + "x" + std::to_string(h) +
                                 " glyph on " + std::to_string(params.page_width) + "x" +
                                 std::to_string(params.page_height) + " pages; use larger pages");
            }

            bool done = false;
            for (int attempt = 0; attempt < kMaxRetries && !done; ++attempt) {
                const int page = rng.uniform_int(0, params.pages - 1);
                const BBox box{rng.uniform_int(kEdgeMargin, max_x), rng.uniform_int(kEdgeMargin, max_y), w, h};
                const BBox guard = expanded(box, kGap);
                const bool clash = std::any_of(placed[page].begin(), placed[page].end(),
                                               [&](const BBox& other) { return intersection_area(guard, other) > 0; });
                if (clash) {
                    continue;
                }
                placed[page].push_back(box);
                Page& target = corpus.pages[page];
                draw_glyph(target.image, box, style);
                truth.occurrences.push_back(Occurrence{category, target.page_id, box});
                if (k == 0) {
                    Query q;
                    q.query_id = numbered("q", c, std::max(2, digits(params.categories - 1)));
                    q.category = category;
                    q.source_page_id = target.page_id;
                    q.bbox = box;
                    truth.queries.push_back(std::move(q));
                }
                done = true;
            }
            if (!done) {
                throw_data_error("cannot place " + std::to_string(params.categories * params.occurrences_per_category) +
                                 " non-overlapping glyphs after " + std::to_string(kMaxRetries) +
                                 " retries; use larger or more pages");
            }
        }
    }

    // Queries are cropped once every glyph is stamped.
    resolve_queries(truth, corpus.pages);
    return corpus;
}

}  // namespace idoc
