#pragma once

// Bottom-up clustering with average linkage. A bridge is a chain of unusually
// close points, so it tends to merge into one cluster early; the largest cluster
// below the stop threshold is reported as the removal candidate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::defense {

struct ClusterReport {
    std::vector<int> assignment;  // cluster id per example, ids are 0..clusters-1 in order of first appearance
    int clusters = 0;
    double threshold = 0.0;
    int removed_cluster = -1;     // largest cluster (ties: lowest id)
    std::vector<int> cluster_sizes;

    std::vector<int> members(int cluster) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == cluster) out.push_back(static_cast<int>(i));
        return out;
    }
};

struct Merge {
    int a = 0;
    int b = 0;
    double distance = 0.0;
};

namespace detail {

/// Condensed upper-triangular storage of a symmetric matrix without diagonal.
class Condensed {
public:
    explicit Condensed(std::size_t n) : n_(n), d_(n * (n - 1) / 2) {}
    double& operator()(std::size_t i, std::size_t j) { return d_[index(i, j)]; }
    double operator()(std::size_t i, std::size_t j) const { return d_[index(i, j)]; }

private:
    std::size_t index(std::size_t i, std::size_t j) const {
        if (i > j) std::swap(i, j);
        return n_ * i - i * (i + 1) / 2 + (j - i - 1);
    }
    std::size_t n_;
    std::vector<double> d_;
};

inline int find_root(std::vector<int>& parent, int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
        parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        x = parent[static_cast<std::size_t>(x)];
    }
    return x;
}

} // namespace detail

/// Full average-linkage dendrogram (nearest-neighbor chain, O(n^2) time and
/// memory). Merges are returned sorted by distance; `a` and `b` are any
/// representative members of the two merged clusters.
inline std::vector<Merge> average_linkage(const nn::Matrix& u) {
    const auto n = static_cast<std::size_t>(u.cols());
    std::vector<Merge> merges;
    if (n < 2) return merges;
    detail::Condensed dist(n);
    const nn::Vector sq = u.colwise().squaredNorm().transpose();
    const nn::Matrix gram = u.transpose() * u;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            dist(i, j) = std::sqrt(std::max(0.0, sq(ii) + sq(jj) - 2.0 * gram(ii, jj)));
        }

    std::vector<int> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<std::size_t> chain;
    merges.reserve(n - 1);
    for (std::size_t step = 0; step + 1 < n; ++step) {
        if (chain.empty())
            for (std::size_t i = 0; i < n; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        std::size_t x = 0, y = 0;
        double best = 0.0;
        for (;;) {
            x = chain.back();
            const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
            best = std::numeric_limits<double>::infinity();
            y = n;
            if (prev != n) {
                y = prev;
                best = dist(x, prev);
            }
            for (std::size_t i = 0; i < n; ++i)
                if (active[i] && i != x && dist(x, i) < best) {
                    best = dist(x, i);
                    y = i;
                }
            if (y == prev) break;
            chain.push_back(y);
        }
        chain.pop_back();
        chain.pop_back();
        // Lance-Williams update for average linkage; the merged cluster lives at min(x, y).
        const std::size_t keep = std::min(x, y), drop = std::max(x, y);
        const double sx = size[x], sy = size[y];
        for (std::size_t i = 0; i < n; ++i)
            if (active[i] && i != x && i != y) dist(keep, i) = (sx * dist(x, i) + sy * dist(y, i)) / (sx + sy);
        merges.push_back({static_cast<int>(keep), static_cast<int>(drop), best});
        size[keep] += size[drop];
        active[drop] = false;
        // Chain entries stay valid: `drop` was the top two, and `keep` is re-queried when reached.
    }
    std::stable_sort(merges.begin(), merges.end(), [](const Merge& a, const Merge& b) { return a.distance < b.distance; });
    return merges;
}

/// Cuts the average-linkage dendrogram at `threshold`: clusters merge while their
/// average inter-cluster distance is at most the threshold.
inline ClusterReport agglomerative_filter(const nn::Matrix& u, double threshold) {
    if (u.cols() < 2) throw ContractError("clustering needs at least two examples");
    if (threshold < 0.0) throw ContractError("threshold must be nonnegative");
    const auto n = static_cast<std::size_t>(u.cols());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& m : average_linkage(u)) {
        if (m.distance > threshold) break;
        const int ra = detail::find_root(parent, m.a), rb = detail::find_root(parent, m.b);
        if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }
    ClusterReport r;
    r.threshold = threshold;
    r.assignment.assign(n, -1);
    std::vector<int> id_of_root(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto root = static_cast<std::size_t>(detail::find_root(parent, static_cast<int>(i)));
        if (id_of_root[root] < 0) {
            id_of_root[root] = r.clusters++;
            r.cluster_sizes.push_back(0);
        }
        r.assignment[i] = id_of_root[root];
        ++r.cluster_sizes[static_cast<std::size_t>(r.assignment[i])];
    }
    r.removed_cluster = static_cast<int>(
        std::max_element(r.cluster_sizes.begin(), r.cluster_sizes.end()) - r.cluster_sizes.begin());
    return r;
}

} // namespace sslpoison::defense
