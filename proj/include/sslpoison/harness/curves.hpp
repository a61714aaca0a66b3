#pragma once

// Per-bridge-point P(y*) trajectories over training and the epoch at which each
// point first crosses 0.5.

#include <ostream>
#include <vector>

#include "sslpoison/errors.hpp"
#include "sslpoison/ssl/trace.hpp"

namespace sslpoison::harness {

struct PropagationCurves {
    std::vector<int> indices;                 // unlabeled indices, in the order given (by alpha)
    std::vector<std::vector<double>> series;  // series[p][epoch] = P(y* | u_p)
    std::vector<int> first_crossing;          // first epoch with P(y*) > 0.5, or -1
};

inline PropagationCurves propagation_curves(const ssl::PredictionTrace& trace, const std::vector<int>& bridge,
                                            int desired_label, double level = 0.5) {
    if (desired_label < 0 || desired_label >= trace.classes) throw ContractError("desired label out of range");
    PropagationCurves out;
    out.indices = bridge;
    for (int u : bridge) {
        if (u < 0 || u >= trace.examples) throw ContractError("bridge index out of range");
        std::vector<double> s(static_cast<std::size_t>(trace.epochs));
        int first = -1;
        for (int e = 0; e < trace.epochs; ++e) {
            s[static_cast<std::size_t>(e)] = trace.at(e, u, desired_label);
            if (first < 0 && s[static_cast<std::size_t>(e)] > level) first = e;
        }
        out.series.push_back(std::move(s));
        out.first_crossing.push_back(first);
    }
    return out;
}

/// CSV: epoch, then one column per bridge point.
inline void write_curves_csv(std::ostream& os, const PropagationCurves& c) {
    os << "epoch";
    for (std::size_t p = 0; p < c.indices.size(); ++p) os << ",u" << c.indices[p];
    os << '\n';
    const std::size_t epochs = c.series.empty() ? 0 : c.series.front().size();
    for (std::size_t e = 0; e < epochs; ++e) {
        os << e;
        for (const auto& s : c.series) os << ',' << s[e];
        os << '\n';
    }
}

} // namespace sslpoison::harness
