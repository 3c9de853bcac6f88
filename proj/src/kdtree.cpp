#include "msad/kdtree.hpp"

#include <algorithm>
#include <queue>

namespace msad {

KdTree3::KdTree3(const std::vector<Point3>& points, std::size_t leaf_size)
    : points_(points), order_(points.size()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
        build(0, points_.size());
    }
}

std::size_t KdTree3::build(std::size_t begin, std::size_t end) {
    std::size_t id = nodes_.size();
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_) return id;

    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident: keep as leaf

    std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    double split = points_[order_[mid]][axis];
    std::size_t left = build(begin, mid);
    std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

Neighbor KdTree3::nearest(const Point3& query) const {
    auto r = knn(query, 1);
    return r.empty() ? Neighbor{} : r.front();
}

std::vector<Neighbor> KdTree3::knn(const Point3& query, std::size_t k, std::optional<std::size_t> exclude) const {
    std::vector<Neighbor> heap;  // max-heap under closer()
    if (k == 0 || nodes_.empty()) return heap;
    heap.reserve(k + 1);
    auto worse = [](const Neighbor& a, const Neighbor& b) { return closer(a, b); };

    auto visit = [&](auto&& self, std::size_t node_id) -> void {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                std::size_t idx = order_[i];
                if (exclude && idx == *exclude) continue;
                Neighbor cand{idx, (points_[idx] - query).squaredNorm()};
                if (heap.size() < k) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end(), worse);
                } else if (closer(cand, heap.front())) {
                    std::pop_heap(heap.begin(), heap.end(), worse);
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end(), worse);
                }
            }
            return;
        }
        double diff = query[node.axis] - node.split;
        std::size_t near = diff < 0 ? node.left : node.right;
        std::size_t far = diff < 0 ? node.right : node.left;
        self(self, near);
        // Equal distance may still hide a lower index, so only strictly farther planes prune.
        if (heap.size() < k || diff * diff <= heap.front().distance_sq) self(self, far);
    };
    visit(visit, 0);
    std::sort_heap(heap.begin(), heap.end(), worse);
    return heap;
}

bool KdTree3::any_within(const Point3& query, double radius) const {
    if (nodes_.empty()) return false;
    const double r2 = radius * radius;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        if (node.axis < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i)
                if ((points_[order_[i]] - query).squaredNorm() <= r2) return true;
            continue;
        }
        double diff = query[node.axis] - node.split;
        stack.push_back(diff < 0 ? node.left : node.right);
        if (diff * diff <= r2) stack.push_back(diff < 0 ? node.right : node.left);
    }
    return false;
}

}  // namespace msad
