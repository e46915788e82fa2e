#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace idoc {

/// Axis-aligned rectangle in page pixel coordinates (left, top, width, height).
/// The defaulted ordering is lexicographic on (x, y, w, h), which is also the
/// deterministic tie-break used when scores are equal.
struct BBox {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    int right() const noexcept { return x + w; }
    int bottom() const noexcept { return y + h; }
    std::int64_t area() const noexcept { return std::int64_t{w} * h; }
    bool valid() const noexcept { return w > 0 && h > 0; }

    friend bool operator==(const BBox&, const BBox&) = default;
    friend auto operator<=>(const BBox&, const BBox&) = default;
};

struct ScoredBox {
    BBox bbox;
    double score = 0.0;
};

std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept;

/// Intersection over union, computed on exact integer areas.
double iou(const BBox& a, const BBox& b) noexcept;

bool contains(const BBox& outer, const BBox& inner) noexcept;

/// Clips to [0,width) x [0,height); nullopt when nothing is left.
std::optional<BBox> clip(const BBox& box, int width, int height) noexcept;

/// Indices ordered by descending score, then ascending (x, y, w, h), then
/// ascending input position.
std::vector<std::size_t> score_order(std::span<const ScoredBox> boxes);

/// Greedy non-maximum suppression. Returns the indices of kept boxes in
/// score_order; a box is dropped iff its IoU with an already kept box is
/// strictly greater than iou_threshold.
std::vector<std::size_t> nms_indices(std::span<const ScoredBox> boxes, double iou_threshold);

std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold);

}  // namespace idoc
