#pragma once

// Label guessing: every method turns a model's view of an unlabeled input into
// a training target plus a mask saying whether to train on it.

#include <cmath>
#include <random>

#include "sslpoison/data/augment.hpp"
#include "sslpoison/nn/model.hpp"
#include "sslpoison/ssl/config.hpp"

namespace sslpoison::ssl {

/// p_c^(1/T) / sum_k p_k^(1/T), per column.
inline nn::Matrix sharpen(const nn::Matrix& p, double temperature) {
    if (temperature <= 0.0) throw ContractError("temperature must be positive");
    nn::Matrix out = p;
    for (Eigen::Index b = 0; b < p.cols(); ++b) {
        // log-space keeps tiny probabilities from underflowing for small T
        nn::Vector lg = p.col(b).cwiseMax(nn::kProbabilityFloor).array().log() / temperature;
        lg.array() -= lg.maxCoeff();
        out.col(b) = lg.array().exp().matrix();
        out.col(b) /= out.col(b).sum();
    }
    return out;
}

inline nn::Vector sharpen(const nn::Vector& p, double temperature) {
    return sharpen(nn::Matrix(p), temperature).col(0);
}

struct GuessedLabels {
    nn::Matrix targets;  // C x B
    nn::Vector mask;     // B, 1 = train on it, 0 = skip
};

struct GuessedLabel {
    nn::Vector soft;
    bool train = false;
};

template <typename Rng>
struct GuessContext {
    const TrainerConfig& config;
    const nn::ModelParams& student;
    const nn::ModelParams* teacher = nullptr;  // mean-teacher only
    data::Augmenter weak;
    Rng& rng;
};

namespace detail {

inline GuessedLabels hard_threshold(const nn::Matrix& p, double threshold) {
    GuessedLabels g{nn::Matrix::Zero(p.rows(), p.cols()), nn::Vector::Zero(p.cols())};
    for (Eigen::Index b = 0; b < p.cols(); ++b) {
        Eigen::Index c = 0;
        const double mx = p.col(b).maxCoeff(&c);
        g.targets(c, b) = 1.0;
        g.mask(b) = mx >= threshold ? 1.0 : 0.0;
    }
    return g;
}

} // namespace detail

/// Batch label guess for the columns of `u` (clean, un-augmented inputs).
template <typename Rng>
GuessedLabels guess_labels(const GuessContext<Rng>& ctx, const nn::Matrix& u) {
    const auto& cfg = ctx.config;
    switch (cfg.method) {
    case Method::pseudo_label:
    case Method::fixmatch_like: {
        const nn::Matrix p = nn::forward_batch(ctx.student, data::augment_batch(ctx.weak, u, ctx.rng));
        return detail::hard_threshold(p, cfg.threshold);
    }
    case Method::uda_like: {
        const nn::Matrix p = nn::forward_batch(ctx.student, data::augment_batch(ctx.weak, u, ctx.rng));
        GuessedLabels g = detail::hard_threshold(p, cfg.threshold);
        g.targets = sharpen(p, cfg.temperature);
        return g;
    }
    case Method::mixmatch_like: {
        nn::Matrix avg = nn::Matrix::Zero(ctx.student.num_classes(), u.cols());
        for (int a = 0; a < cfg.augment_count; ++a)
            avg += nn::forward_batch(ctx.student, data::augment_batch(ctx.weak, u, ctx.rng));
        avg /= static_cast<double>(cfg.augment_count);
        return {sharpen(avg, cfg.temperature), nn::Vector::Ones(u.cols())};
    }
    case Method::mean_teacher: {
        const nn::ModelParams& model = ctx.teacher ? *ctx.teacher : ctx.student;
        return {nn::forward_batch(model, data::augment_batch(ctx.weak, u, ctx.rng)), nn::Vector::Ones(u.cols())};
    }
    case Method::pi_model:
        return {nn::forward_batch(ctx.student, data::augment_batch(ctx.weak, u, ctx.rng)), nn::Vector::Ones(u.cols())};
    case Method::vat:
        return {nn::forward_batch(ctx.student, u), nn::Vector::Ones(u.cols())};
    }
    return {};
}

template <typename Rng>
GuessedLabel guess_label(const GuessContext<Rng>& ctx, const nn::Vector& u) {
    auto g = guess_labels(ctx, nn::Matrix(u));
    return {g.targets.col(0), g.mask(0) > 0.0};
}

} // namespace sslpoison::ssl
