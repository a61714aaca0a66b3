#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sslpoison/errors.hpp"

namespace sslpoison::harness {

/// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
        i = j + 1;
    }
    return rank;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ContractError("correlation needs two equal series of length >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// Spearman rank correlation (Pearson on average ranks). 0 when either series is constant.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

struct PairedTest {
    double mean_difference = 0.0;
    double t_statistic = 0.0;
    int n = 0;
    double critical = 0.0;  // two-sided 5% critical value for n - 1 degrees of freedom
    bool significant = false;
};

/// Paired two-sided t-test at the 5% level on a - b.
inline PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ContractError("paired test needs two equal series of length >= 2");
    static constexpr double kCritical[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                           2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                           2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    PairedTest r;
    r.n = static_cast<int>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double n = static_cast<double>(d.size());
    r.mean_difference = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : d) ss += (x - r.mean_difference) * (x - r.mean_difference);
    const double se = std::sqrt(ss / (n - 1.0) / n);
    const int dof = r.n - 1;
    r.critical = dof <= 30 ? kCritical[dof - 1] : 1.96;
    if (se == 0.0) {
        r.t_statistic = r.mean_difference == 0.0 ? 0.0 : std::copysign(INFINITY, r.mean_difference);
    } else {
        r.t_statistic = r.mean_difference / se;
    }
    r.significant = std::abs(r.t_statistic) > r.critical;
    return r;
}

} // namespace sslpoison::harness
