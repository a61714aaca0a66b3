#pragma once

// Randomized scan for unlabeled points that lie on a common straight line, the
// signature of a noise-free linear interpolation bridge.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::defense {

using nn::Matrix;
using nn::Vector;

struct CollinearOptions {
    double epsilon = 1e-6;  // max distance to the line
    int min_run = 5;        // at least this many points on the line
    int trials = 2000;
    int neighbors = 3;      // partner drawn from the anchor's nearest neighbors
    std::uint64_t seed = 0;
};

namespace detail {

/// Distance from every column of `u` to the line through a and b.
inline Vector distances_to_line(const Matrix& u, const Vector& a, const Vector& b) {
    const Vector dir = b - a;
    const double len2 = dir.squaredNorm();
    const Matrix diff = u.colwise() - a;
    if (len2 == 0.0) return diff.colwise().norm().transpose();
    const Vector t = (diff.transpose() * dir) / len2;
    Vector out(u.cols());
    for (Eigen::Index j = 0; j < u.cols(); ++j) out(j) = (diff.col(j) - t(j) * dir).norm();
    return out;
}

} // namespace detail

/// Each trial draws an anchor u uniformly and a partner w among u's nearest
/// neighbors, then flags every point within epsilon of the line through u and w
/// if at least min_run points qualify. Returns the union over trials, sorted.
///
/// Random pairs almost never land on the same bridge, hence the neighbor draw;
/// and two adjacent bridge points only span a short piece of the bridge, hence
/// the full line rather than the segment.
inline std::vector<int> detect_collinear(const Matrix& u, const CollinearOptions& opt = {}) {
    if (!(opt.epsilon > 0.0)) throw ContractError("epsilon must be positive");
    if (opt.min_run < 3) throw ContractError("min_run must be at least 3");
    if (opt.trials < 0 || opt.neighbors < 1) throw ContractError("need nonnegative trials and at least one neighbor");
    const Eigen::Index n = u.cols();
    std::set<int> flagged;
    if (n < opt.min_run) return {};
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    const Vector sq = u.colwise().squaredNorm().transpose();
    for (int t = 0; t < opt.trials; ++t) {
        const Eigen::Index a = pick(rng);
        // Squared distances from the anchor, then its nearest distinct neighbors.
        Vector d2 = sq.array() + sq(a) - 2.0 * (u.transpose() * u.col(a)).array();
        d2(a) = std::numeric_limits<double>::infinity();
        const int k = static_cast<int>(std::min<Eigen::Index>(opt.neighbors, n - 1));
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) idx[static_cast<std::size_t>(j)] = j;
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                          [&](Eigen::Index x, Eigen::Index y) { return d2(x) < d2(y) || (d2(x) == d2(y) && x < y); });
        std::uniform_int_distribution<int> which(0, k - 1);
        const Eigen::Index b = idx[static_cast<std::size_t>(which(rng))];
        if ((u.col(a) - u.col(b)).norm() <= opt.epsilon) continue;  // degenerate pair: no direction
        const Vector dist = detail::distances_to_line(u, u.col(a), u.col(b));
        std::vector<int> on;
        for (Eigen::Index j = 0; j < n; ++j)
            if (dist(j) <= opt.epsilon) on.push_back(static_cast<int>(j));
        if (static_cast<int>(on.size()) >= opt.min_run) flagged.insert(on.begin(), on.end());
    }
    return {flagged.begin(), flagged.end()};
}

} // namespace sslpoison::defense
