#include "idoc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "idoc/error.hpp"

namespace idoc {

std::int64_t intersection_area(const BBox& a, const BBox& b) noexcept
{
    const std::int64_t left = std::max(a.x, b.x);
    const std::int64_t top = std::max(a.y, b.y);
    const std::int64_t right = std::min<std::int64_t>(a.right(), b.right());
    const std::int64_t bottom = std::min<std::int64_t>(a.bottom(), b.bottom());
    if (right <= left || bottom <= top) {
        return 0;
    }
    return (right - left) * (bottom - top);
}

double iou(const BBox& a, const BBox& b) noexcept
{
    const std::int64_t inter = intersection_area(a, b);
    if (inter == 0) {
        return 0.0;
    }
    const std::int64_t uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

bool contains(const BBox& outer, const BBox& inner) noexcept
{
    return inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() &&
           inner.bottom() <= outer.bottom();
}

std::optional<BBox> clip(const BBox& box, int width, int height) noexcept
{
    const int left = std::clamp(box.x, 0, width);
    const int top = std::clamp(box.y, 0, height);
    const int right = std::clamp(box.right(), 0, width);
    const int bottom = std::clamp(box.bottom(), 0, height);
    if (right <= left || bottom <= top) {
        return std::nullopt;
    }
    return BBox{left, top, right - left, bottom - top};
}

std::vector<std::size_t> score_order(std::span<const ScoredBox> boxes)
{
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (boxes[i].score != boxes[j].score) {
            return boxes[i].score > boxes[j].score;
        }
        return boxes[i].bbox < boxes[j].bbox;
    });
    return order;
}

std::vector<std::size_t> nms_indices(std::span<const ScoredBox> boxes, double iou_threshold)
{
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
        throw_usage_error("nms iou threshold must lie in [0,1], got " + std::to_string(iou_threshold));
    }
    std::vector<std::size_t> kept;
    for (std::size_t candidate : score_order(boxes)) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return iou(boxes[k].bbox, boxes[candidate].bbox) > iou_threshold;
        });
        if (!suppressed) {
            kept.push_back(candidate);
        }
    }
    return kept;
}

std::vector<ScoredBox> nms(std::span<const ScoredBox> boxes, double iou_threshold)
{
    std::vector<ScoredBox> out;
    for (std::size_t i : nms_indices(boxes, iou_threshold)) {
        out.push_back(boxes[i]);
    }
    return out;
}

}  // namespace idoc
