#pragma once

// Source selection when the victim's initial weights are known: the smallest
// perturbation of x* that the initial model already assigns to y*.

#include <algorithm>
#include <cmath>
#include <limits>

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::poison {

struct TransferSource {
    bool found = false;
    data::Vector source;  // x* + delta
    double delta_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

namespace detail {

/// log p_y - max_{k != y} log p_k, and the runner-up class.
inline double class_margin(const nn::ModelParams& model, const data::Vector& x, int y, int& runner_up) {
    const nn::Vector p = nn::forward(model, x);
    double best = -std::numeric_limits<double>::infinity();
    runner_up = y == 0 ? 1 : 0;
    for (int k = 0; k < p.size(); ++k)
        if (k != y && p(k) > best) {
            best = p(k);
            runner_up = k;
        }
    return std::log(p(y)) - std::log(best);
}

} // namespace detail

/// Linearized boundary steps (each jumping to the local decision boundary plus
/// `overshoot`, capped at `step_size` in norm) until the model predicts y*, then a
/// bisection on the perturbation scale to trim the overshoot. Points stay in the
/// feature box.
inline TransferSource find_transfer_source(const nn::ModelParams& initial, const data::Vector& target,
                                           int desired_label, int steps, double step_size,
                                           double overshoot = 0.02) {
    if (desired_label < 0 || desired_label >= initial.num_classes()) throw ContractError("desired label out of range");
    if (steps < 0 || step_size <= 0.0) throw ContractError("need nonnegative steps and a positive step size");
    TransferSource out;
    int runner = 0;
    if (nn::predict_class(initial, target) == desired_label) {
        out.found = true;
        out.source = target;
        out.delta_norm = 0.0;
        return out;
    }
    data::Vector x = target;
    for (int it = 0; it < steps; ++it) {
        out.iterations = it + 1;
        const double margin = detail::class_margin(initial, x, desired_label, runner);
        if (nn::predict_class(initial, x) == desired_label) break;
        nn::Vector w = nn::Vector::Zero(initial.num_classes());
        w(desired_label) = 1.0;
        w(runner) = -1.0;
        const nn::Vector g = nn::logit_input_gradient(initial, x, w);
        const double g2 = g.squaredNorm();
        if (!(g2 > 0.0)) break;
        nn::Vector step = g * ((-margin + overshoot) / g2);
        if (step.norm() > step_size) step *= step_size / step.norm();
        x = data::clip_to_box(x + step);
    }
    if (nn::predict_class(initial, x) != desired_label) return out;

    // Shrink delta while the prediction stays y*.
    const data::Vector delta = x - target;
    double lo = 0.0, hi = 1.0;
    for (int b = 0; b < 60; ++b) {
        const double mid = 0.5 * (lo + hi);
        if (nn::predict_class(initial, data::Vector(target + mid * delta)) == desired_label)
            hi = mid;
        else
            lo = mid;
    }
    out.found = true;
    out.source = target + hi * delta;
    out.delta_norm = (out.source - target).norm();
    return out;
}

} // namespace sslpoison::poison
