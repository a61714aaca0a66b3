#pragma once

#include <cmath>
#include <random>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::ssl {

struct VatPerturbation {
    nn::Matrix delta;        // d x B, each column of norm epsilon
    int fallback_count = 0;  // columns that used a random direction
};

namespace detail {

template <typename Rng>
nn::Vector random_unit(Eigen::Index d, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    nn::Vector v(d);
    do {
        for (Eigen::Index k = 0; k < d; ++k) v(k) = gauss(rng);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

} // namespace detail

/// One power-iteration step toward the input direction that most increases
/// KL(f(u) || f(u + r)), scaled to radius `epsilon`. Columns are independent.
template <typename Rng>
VatPerturbation vat_perturbation(const nn::ModelParams& params, const nn::Matrix& inputs, double epsilon, double xi,
                                 Rng& rng) {
    if (epsilon < 0.0) throw ContractError("VAT radius must be nonnegative");
    if (xi <= 0.0) throw ContractError("VAT step must be positive");
    const Eigen::Index d = inputs.rows();
    const Eigen::Index B = inputs.cols();
    VatPerturbation out;
    out.delta = nn::Matrix::Zero(d, B);
    if (epsilon == 0.0) return out;

    const nn::Matrix clean = nn::forward_batch(params, inputs);
    nn::Matrix probe(d, B);
    for (Eigen::Index b = 0; b < B; ++b) probe.col(b) = detail::random_unit(d, rng);
    const nn::Matrix grad = nn::input_gradient(params, inputs + xi * probe, clean, nn::LossKind::kl_divergence);
    for (Eigen::Index b = 0; b < B; ++b) {
        const double norm = grad.col(b).norm();
        if (!(norm > 1e-300) || !std::isfinite(norm)) {
            out.delta.col(b) = epsilon * detail::random_unit(d, rng);
            ++out.fallback_count;
        } else {
            out.delta.col(b) = grad.col(b) * (epsilon / norm);
        }
    }
    return out;
}

template <typename Rng>
nn::Vector vat_perturbation(const nn::ModelParams& params, const nn::Vector& u, double epsilon, double xi, Rng& rng,
                            bool* used_fallback = nullptr) {
    auto r = vat_perturbation(params, nn::Matrix(u), epsilon, xi, rng);
    if (used_fallback) *used_fallback = r.fallback_count > 0;
    return r.delta.col(0);
}

} // namespace sslpoison::ssl
