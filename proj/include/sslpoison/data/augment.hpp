#pragma once

#include <Eigen/Dense>

#include <random>

#include "sslpoison/data/dataset.hpp"

namespace sslpoison::data {

enum class AugmentKind { weak, strong };

/// Additive Gaussian noise, plus feature dropout for the strong kind. Results are
/// clipped back into the feature box.
struct Augmenter {
    AugmentKind kind = AugmentKind::weak;
    double sigma = 0.05;
    double dropout = 0.0;  // ignored for weak

    static Augmenter weak(double sigma) { return {AugmentKind::weak, sigma, 0.0}; }
    static Augmenter strong(double sigma, double dropout) { return {AugmentKind::strong, sigma, dropout}; }
};

template <typename Rng>
Vector augment(const Augmenter& a, const Vector& x, Rng& rng) {
    Vector out = x;
    if (a.sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, a.sigma);
        for (Eigen::Index k = 0; k < out.size(); ++k) out(k) += gauss(rng);
    }
    if (a.kind == AugmentKind::strong && a.dropout > 0.0) {
        std::bernoulli_distribution drop(a.dropout);
        for (Eigen::Index k = 0; k < out.size(); ++k)
            if (drop(rng)) out(k) = 0.0;
    }
    return clip_to_box(std::move(out));
}

/// Column-wise augmentation of a d x B batch.
template <typename Rng>
Matrix augment_batch(const Augmenter& a, const Matrix& xs, Rng& rng) {
    Matrix out = xs;
    if (a.sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, a.sigma);
        for (Eigen::Index k = 0; k < out.size(); ++k) out.data()[k] += gauss(rng);
    }
    if (a.kind == AugmentKind::strong && a.dropout > 0.0) {
        std::bernoulli_distribution drop(a.dropout);
        for (Eigen::Index k = 0; k < out.size(); ++k)
            if (drop(rng)) out.data()[k] = 0.0;
    }
    return out.cwiseMax(kFeatureMin).cwiseMin(kFeatureMax);
}

} // namespace sslpoison::data
