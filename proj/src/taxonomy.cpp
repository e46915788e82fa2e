#include <algorithm>
#include <cmath>
#include <set>

#include "idoc/corpus.hpp"
#include "idoc/error.hpp"

namespace idoc {

QueryCell categorize_query(const BBox& bbox, const TaxonomyThresholds& thresholds)
{
    const double area = static_cast<double>(bbox.area());
    const double aspect =
        static_cast<double>(std::max(bbox.w, bbox.h)) / static_cast<double>(std::min(bbox.w, bbox.h));
    return QueryCell{area >= thresholds.area ? SizeClass::big : SizeClass::small,
                     aspect <= thresholds.aspect ? ShapeClass::square : ShapeClass::non_square};
}

const char* to_string(SizeClass s)
{
    return s == SizeClass::big ? "big" : "small";
}

const char* to_string(ShapeClass s)
{
    return s == ShapeClass::square ? "square" : "non-square";
}

std::string cell_name(const QueryCell& cell)
{
    return std::string(to_string(cell.size)) + "-" + to_string(cell.shape);
}

std::vector<QueryCell> all_cells()
{
    return {{SizeClass::big, ShapeClass::square},
            {SizeClass::big, ShapeClass::non_square},
            {SizeClass::small, ShapeClass::square},
            {SizeClass::small, ShapeClass::non_square}};
}

Calibration calibrate_taxonomy(const std::vector<Query>& queries, double target)
{
    if (queries.empty()) {
        throw_data_error("calibration needs at least one query");
    }
    if (!(target >= 0.0 && target <= 1.0)) {
        throw_usage_error("calibration target must lie in [0,1]");
    }

    std::set<double> areas;
    for (const Query& q : queries) {
        areas.insert(static_cast<double>(q.bbox.area()));
    }
    areas.insert(*areas.rbegin() + 1.0);

    const TaxonomyThresholds defaults;
    auto distance_to_defaults = [&](const CalibrationPoint& p) {
        return std::abs(std::log(p.area / defaults.area)) + std::abs(p.aspect - defaults.aspect);
    };

    Calibration result;
    bool have_best = false;
    for (double area : areas) {
        // Aspect thresholds 1.00, 1.05, ..., 4.00; integer steps avoid drift.
        for (int step = 0; step <= 60; ++step) {
            const TaxonomyThresholds t{area, 1.0 + step / 20.0};
            std::size_t hits = 0;
            for (const Query& q : queries) {
                const QueryCell c = categorize_query(q.bbox, t);
                hits += c.size == SizeClass::small && c.shape == ShapeClass::non_square;
            }
            const CalibrationPoint point{t.area, t.aspect,
                                         static_cast<double>(hits) / static_cast<double>(queries.size())};
            result.sweep.push_back(point);

            if (!have_best) {
                result.best = point;
                have_best = true;
                continue;
            }
            const double gap = std::abs(point.small_non_square_fraction - target);
            const double best_gap = std::abs(result.best.small_non_square_fraction - target);
            if (gap < best_gap || (gap == best_gap && distance_to_defaults(point) < distance_to_defaults(result.best))) {
                result.best = point;
            }
        }
    }
    return result;
}

}  // namespace idoc
