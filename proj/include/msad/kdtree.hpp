#pragma once

#include "msad/point_cloud.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace msad {

struct Neighbor {
    std::size_t index = 0;
    double distance_sq = std::numeric_limits<double>::infinity();
};

/// Orders by distance, then by index; the tie rule used by every exact search here.
inline bool closer(const Neighbor& a, const Neighbor& b) {
    return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.index < b.index);
}

/// Exact 3-D kd-tree. Results match a linear scan including the lower-index tie rule.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Point3>& points, std::size_t leaf_size = 8);

    std::size_t size() const { return points_.size(); }

    Neighbor nearest(const Point3& query) const;

    /// k nearest points sorted by closer(); `exclude` is skipped (used to drop the query itself).
    std::vector<Neighbor> knn(const Point3& query, std::size_t k,
                              std::optional<std::size_t> exclude = std::nullopt) const;

    bool any_within(const Point3& query, double radius) const;

private:
    struct Node {
        std::size_t begin = 0, end = 0;  // range into order_
        int axis = -1;                   // -1 for leaves
        double split = 0.0;
        std::size_t left = 0, right = 0;
    };

    std::size_t build(std::size_t begin, std::size_t end);

    std::vector<Point3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_;
};

}  // namespace msad
