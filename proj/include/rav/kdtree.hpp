#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

namespace rav {

inline constexpr int kDescriptorDim = 128;

/// 128-component descriptor with a stable id.
struct Descriptor {
    std::array<double, kDescriptorDim> values{};
    int id = 0;

    void validate() const {
        for (double v : values)
            if (!std::isfinite(v))
                throw std::invalid_argument("Descriptor: non-finite component");
    }
};

inline double squared_distance(const Descriptor& a, const Descriptor& b) {
    double d = 0.0;
    for (int i = 0; i < kDescriptorDim; ++i) {
        const double diff = a.values[i] - b.values[i];
        d += diff * diff;
    }
    return d;
}

struct SearchBudget {
    int max_leaves = 1;

    void validate() const {
        if (max_leaves < 1)
            throw std::invalid_argument("SearchBudget: max_leaves must be >= 1");
    }
};

struct SearchResult {
    int id = -1;
    double sq_distance = std::numeric_limits<double>::infinity();
    int leaves_visited = 0;
};

/// Exact nearest neighbor by linear scan; ties broken by lowest id.
inline SearchResult exact_nn(const std::vector<Descriptor>& set, const Descriptor& query) {
    if (set.empty()) throw std::invalid_argument("exact_nn: empty descriptor set");
    SearchResult best;
    for (const auto& d : set) {
        const double dist = squared_distance(d, query);
        if (dist < best.sq_distance || (dist == best.sq_distance && d.id < best.id)) {
            best.id = d.id;
            best.sq_distance = dist;
        }
    }
    return best;
}

/// Balanced k-d tree over descriptors: recursive median split on the
/// dimension of maximum spread. Descent and storage share one tie rule:
/// coordinates equal to the split value go right.
class KdTree {
public:
    KdTree(std::vector<Descriptor> descriptors, int leaf_capacity)
        : descriptors_(std::move(descriptors)), leaf_capacity_(leaf_capacity) {
        if (descriptors_.empty()) throw std::invalid_argument("KdTree: empty input");
        if (leaf_capacity_ < 1) throw std::invalid_argument("KdTree: leaf_capacity must be >= 1");
        for (const auto& d : descriptors_) d.validate();
        order_.resize(descriptors_.size());
        std::iota(order_.begin(), order_.end(), 0);
        root_ = build_node(0, descriptors_.size());
    }

    int leaf_count() const { return leaf_count_; }
    int leaf_capacity() const { return leaf_capacity_; }
    const std::vector<Descriptor>& descriptors() const { return descriptors_; }

    /// Best-bin-first search bounded by the leaf budget. Unexplored subtrees
    /// are ordered by axis distance to the splitting hyperplane, a valid
    /// lower bound, so the result distance never undershoots the exact NN
    /// and equals it once every leaf fits in the budget.
    SearchResult nn_search(const Descriptor& query, const SearchBudget& budget) const {
        budget.validate();
        SearchResult best;
        const int max_leaves = std::min(budget.max_leaves, leaf_count_);
        // min-heap on (lower bound, node index) for determinism
        using Entry = std::pair<double, int>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> frontier;
        frontier.emplace(0.0, root_);
        while (!frontier.empty() && best.leaves_visited < max_leaves) {
            auto [bound, idx] = frontier.top();
            frontier.pop();
            if (bound >= best.sq_distance) continue;
            // descend to the near leaf, queueing far children on the way
            while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) {
                const Node& nd = nodes_[static_cast<std::size_t>(idx)];
                const double off = query.values[static_cast<std::size_t>(nd.split_dim)] - nd.split_value;
                const int near = off < 0.0 ? nd.left : nd.right;
                const int far = off < 0.0 ? nd.right : nd.left;
                frontier.emplace(off * off, far);
                idx = near;
            }
            const Node& leaf = nodes_[static_cast<std::size_t>(idx)];
            for (std::size_t i = leaf.begin; i < leaf.end; ++i) {
                const Descriptor& d = descriptors_[order_[i]];
                const double dist = squared_distance(d, query);
                if (dist < best.sq_distance || (dist == best.sq_distance && d.id < best.id)) {
                    best.id = d.id;
                    best.sq_distance = dist;
                }
            }
            ++best.leaves_visited;
        }
        return best;
    }

    /// Leaf buckets as id lists, for structural checks.
    std::vector<std::vector<int>> leaves() const {
        std::vector<std::vector<int>> out;
        for (const auto& nd : nodes_) {
            if (!nd.is_leaf()) continue;
            std::vector<int> ids;
            for (std::size_t i = nd.begin; i < nd.end; ++i)
                ids.push_back(descriptors_[order_[i]].id);
            out.push_back(std::move(ids));
        }
        return out;
    }

private:
    struct Node {
        int split_dim = -1;
        double split_value = 0.0;
        int left = -1;
        int right = -1;
        std::size_t begin = 0;
        std::size_t end = 0;

        bool is_leaf() const { return split_dim < 0; }
    };

    int build_node(std::size_t begin, std::size_t end) {
        const std::size_t n = end - begin;
        int dim = -1;
        double split = 0.0;
        if (n > static_cast<std::size_t>(leaf_capacity_)) {
            double best_spread = 0.0;
            for (int d = 0; d < kDescriptorDim; ++d) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (std::size_t i = begin; i < end; ++i) {
                    const double v = descriptors_[order_[i]].values[static_cast<std::size_t>(d)];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                if (hi - lo > best_spread) {
                    best_spread = hi - lo;
                    dim = d;
                }
            }
            if (dim >= 0) {
                auto key = [&](std::size_t oi) {
                    return descriptors_[oi].values[static_cast<std::size_t>(dim)];
                };
                const std::size_t mid = begin + n / 2;
                std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order_.begin() + static_cast<std::ptrdiff_t>(mid),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
                split = key(order_[mid]);
                // points with coordinate == split go right; if that leaves the
                // left side empty (duplicated median), split above the minimum
                auto mid_it = std::partition(
                    order_.begin() + static_cast<std::ptrdiff_t>(begin),
                    order_.begin() + static_cast<std::ptrdiff_t>(end),
                    [&](std::size_t oi) { return key(oi) < split; });
                std::size_t left_n = static_cast<std::size_t>(
                    mid_it - (order_.begin() + static_cast<std::ptrdiff_t>(begin)));
                if (left_n == 0) {
                    double next_up = std::numeric_limits<double>::infinity();
                    for (std::size_t i = begin; i < end; ++i)
                        if (key(order_[i]) > split) next_up = std::min(next_up, key(order_[i]));
                    split = next_up;
                    mid_it = std::partition(
                        order_.begin() + static_cast<std::ptrdiff_t>(begin),
                        order_.begin() + static_cast<std::ptrdiff_t>(end),
                        [&](std::size_t oi) { return key(oi) < split; });
                    left_n = static_cast<std::size_t>(
                        mid_it - (order_.begin() + static_cast<std::ptrdiff_t>(begin)));
                }
                const int self = allocate_node();
                nodes_[static_cast<std::size_t>(self)].split_dim = dim;
                nodes_[static_cast<std::size_t>(self)].split_value = split;
                const int left = build_node(begin, begin + left_n);
                const int right = build_node(begin + left_n, end);
                nodes_[static_cast<std::size_t>(self)].left = left;
                nodes_[static_cast<std::size_t>(self)].right = right;
                return self;
            }
            // zero spread on every dimension: identical points, keep as leaf
        }
        const int self = allocate_node();
        nodes_[static_cast<std::size_t>(self)].begin = begin;
        nodes_[static_cast<std::size_t>(self)].end = end;
        ++leaf_count_;
        return self;
    }

    int allocate_node() {
        nodes_.emplace_back();
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Descriptor> descriptors_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int leaf_capacity_;
    int leaf_count_ = 0;
    int root_ = -1;
};

}  // namespace rav
