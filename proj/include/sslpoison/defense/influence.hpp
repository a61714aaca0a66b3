#pragma once

// Training-dynamics influence monitor. Poisoned points change prediction one
// epoch after their bridge neighbor does, so each one has a few neighbors whose
// lagged prediction deltas match its own almost exactly. Benign points have no
// such followers.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>
#include <vector>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"
#include "sslpoison/ssl/trace.hpp"

namespace sslpoison::defense {

/// (K-1) x N x C prediction differences, row-major like the trace.
struct DeltaTensor {
    int steps = 0;
    int examples = 0;
    int classes = 0;
    std::vector<double> values;

    double at(int step, int example, int cls) const {
        return values[(static_cast<std::size_t>(step) * examples + example) * classes + cls];
    }
};

/// delta_i(u) = f_{i+1}(u) - f_i(u).
inline DeltaTensor prediction_deltas(const ssl::PredictionTrace& trace) {
    if (trace.epochs < 2) throw ContractError("prediction deltas need at least two epochs");
    DeltaTensor d;
    d.steps = trace.epochs - 1;
    d.examples = trace.examples;
    d.classes = trace.classes;
    const std::size_t row = static_cast<std::size_t>(trace.examples) * trace.classes;
    d.values.resize(static_cast<std::size_t>(d.steps) * row);
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = trace.values[i + row] - trace.values[i];
    return d;
}

namespace detail {

inline void check_influence_trace(const ssl::PredictionTrace& trace) {
    if (trace.epochs < 3) throw ContractError("influence needs at least three epochs");
    if (trace.values.size() != static_cast<std::size_t>(trace.epochs) * trace.examples * trace.classes)
        throw ShapeError("trace values do not match its header");
}

/// Leading window of u: [delta_0 .. delta_{K-3}, f_{K-2}]; lagging window:
/// [delta_1 .. delta_{K-2}, f_{K-1}]. Both have (K-1)*C entries.
inline nn::Vector window(const ssl::PredictionTrace& t, int u, bool lagging) {
    const int K = t.epochs, C = t.classes;
    nn::Vector w((K - 1) * C);
    const int shift = lagging ? 1 : 0;
    for (int e = 0; e < K - 2; ++e)
        for (int c = 0; c < C; ++c) w(e * C + c) = t.at(e + shift + 1, u, c) - t.at(e + shift, u, c);
    for (int c = 0; c < C; ++c) w((K - 2) * C + c) = t.at(K - 2 + shift, u, c);
    return w;
}

/// All windows as columns: ((K-1)*C) x N.
inline nn::Matrix windows(const ssl::PredictionTrace& t, bool lagging) {
    nn::Matrix m((t.epochs - 1) * t.classes, t.examples);
    for (int u = 0; u < t.examples; ++u) m.col(u) = window(t, u, lagging);
    return m;
}

} // namespace detail

/// Squared distance between u_i's leading window and u_j's lagging window; zero
/// when u_j repeats u_i's prediction changes exactly one epoch later.
inline double influence(const ssl::PredictionTrace& trace, int i, int j) {
    detail::check_influence_trace(trace);
    if (i < 0 || j < 0 || i >= trace.examples || j >= trace.examples)
        throw ContractError("influence index out of range");
    return (detail::window(trace, i, false) - detail::window(trace, j, true)).squaredNorm();
}

struct InfluenceReport {
    std::vector<double> scores;   // mean influence of each example's k nearest (smallest-influence) neighbors
    std::vector<int> flagged;     // sorted indices below the threshold
    double threshold = 0.0;       // flagged iff score < threshold; 0 when nothing is flagged
    double gap_decades = 0.0;     // width of the largest gap in log10 score
    int k = 5;
};

struct InfluenceOptions {
    int k = 5;
    double min_gap_decades = 1.0;
    int threads = 0;  // 0: hardware concurrency
};

/// Largest gap between consecutive sorted log10 scores; flags everything below it
/// when the gap is at least `min_gap_decades` wide.
inline void apply_gap_threshold(InfluenceReport& r, double min_gap_decades) {
    r.flagged.clear();
    r.threshold = 0.0;
    r.gap_decades = 0.0;
    const std::size_t n = r.scores.size();
    if (n < 2) return;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.scores[a] < r.scores[b]; });
    auto lg = [](double s) { return std::log10(std::max(s, 1e-300)); };
    std::size_t cut = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double gap = lg(r.scores[order[i + 1]]) - lg(r.scores[order[i]]);
        if (gap > r.gap_decades) {
            r.gap_decades = gap;
            cut = i + 1;
        }
    }
    if (r.gap_decades < min_gap_decades) return;
    r.threshold = std::sqrt(std::max(r.scores[order[cut - 1]], 1e-300) * r.scores[order[cut]]);
    for (std::size_t i = 0; i < cut; ++i) r.flagged.push_back(static_cast<int>(order[i]));
    std::sort(r.flagged.begin(), r.flagged.end());
}

/// Exact pairwise influence for every example (self excluded), averaged over
/// its k smallest values, followed by the gap threshold. Rows are processed in
/// parallel blocks; candidates found through the Gram expansion are rescored
/// exactly so that tiny scores keep full precision.
inline InfluenceReport influence_report(const ssl::PredictionTrace& trace, const InfluenceOptions& opt = {}) {
    detail::check_influence_trace(trace);
    const int n = trace.examples;
    if (opt.k < 1 || n <= opt.k) throw ContractError("need 1 <= k < number of examples");
    const nn::Matrix lead = detail::windows(trace, false);
    const nn::Matrix lag = detail::windows(trace, true);
    const nn::Vector lead_sq = lead.colwise().squaredNorm().transpose();
    const nn::Vector lag_sq = lag.colwise().squaredNorm().transpose();

    InfluenceReport r;
    r.k = opt.k;
    r.scores.assign(static_cast<std::size_t>(n), 0.0);
    const int extra = std::min(n - 1 - opt.k, 8);  // slack for rounding in the expansion
    const int keep = opt.k + extra;
    constexpr int kBlock = 256;

    auto work = [&](int begin, int end) {
        const nn::Matrix g = lead.middleCols(begin, end - begin).transpose() * lag;  // rows: i, cols: j
        std::vector<std::pair<double, int>> cand;
        for (int i = begin; i < end; ++i) {
            cand.clear();
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                cand.emplace_back(lead_sq(i) + lag_sq(j) - 2.0 * g(i - begin, j), j);
            }
            std::partial_sort(cand.begin(), cand.begin() + keep, cand.end());
            std::vector<double> exact;
            for (int c = 0; c < keep; ++c)
                exact.push_back((lead.col(i) - lag.col(cand[static_cast<std::size_t>(c)].second)).squaredNorm());
            std::partial_sort(exact.begin(), exact.begin() + opt.k, exact.end());
            double s = 0.0;
            for (int c = 0; c < opt.k; ++c) s += exact[static_cast<std::size_t>(c)];
            r.scores[static_cast<std::size_t>(i)] = s / opt.k;
        }
    };
    const int blocks = (n + kBlock - 1) / kBlock;
    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, blocks);
    if (threads <= 1) {
        for (int b = 0; b < blocks; ++b) work(b * kBlock, std::min(n, (b + 1) * kBlock));
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (int b = t; b < blocks; b += threads) work(b * kBlock, std::min(n, (b + 1) * kBlock));
            });
        for (auto& th : pool) th.join();
    }
    apply_gap_threshold(r, opt.min_gap_decades);
    return r;
}

/// One line per example ("index score flagged"), then a summary block.
inline void write_influence_report(std::ostream& os, const InfluenceReport& r) {
    os << "# index score flagged\n";
    std::vector<bool> flag(r.scores.size(), false);
    for (int f : r.flagged) flag[static_cast<std::size_t>(f)] = true;
    os << std::setprecision(9);
    for (std::size_t i = 0; i < r.scores.size(); ++i) os << i << ' ' << r.scores[i] << ' ' << (flag[i] ? 1 : 0) << '\n';
    os << "# k " << r.k << "\n# threshold " << r.threshold << "\n# gap_decades " << r.gap_decades << "\n# flagged "
       << r.flagged.size() << " of " << r.scores.size() << '\n';
}

} // namespace sslpoison::defense
