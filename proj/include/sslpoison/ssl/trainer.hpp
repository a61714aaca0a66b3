#pragma once

// Shared training loop for the seven semi-supervised methods.
//
// Each step combines cross-entropy on a weakly augmented labeled batch with a
// method-specific loss on an unlabeled batch. An epoch is one pass over the
// unlabeled pool; after every epoch the model's predictions on the clean
// unlabeled features are appended to the trace.
//
// Labeled sampling and unlabeled work draw from separate random streams, so
// with lambda_u = 0 every method performs the same supervised-only run.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "sslpoison/data/augment.hpp"
#include "sslpoison/data/dataset.hpp"
#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"
#include "sslpoison/ssl/config.hpp"
#include "sslpoison/ssl/guess.hpp"
#include "sslpoison/ssl/trace.hpp"
#include "sslpoison/ssl/vat.hpp"

namespace sslpoison::ssl {

struct TrainMetrics {
    std::vector<double> test_accuracy;   // per epoch; empty if there is no test set
    std::vector<double> supervised_loss; // per-epoch mean
    std::vector<double> unlabeled_loss;  // per-epoch mean (weighted)
    std::vector<double> mask_rate;       // fraction of unlabeled examples trained on
    int vat_fallbacks = 0;
};

struct TrainResult {
    nn::ModelParams model;
    PredictionTrace trace;
    TrainMetrics metrics;
};

inline double accuracy(const nn::ModelParams& model, const std::vector<data::Example>& examples) {
    if (examples.empty()) return 0.0;
    nn::Matrix x(model.input_dim(), static_cast<Eigen::Index>(examples.size()));
    for (std::size_t i = 0; i < examples.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = examples[i].features;
    const nn::Matrix p = nn::forward_batch(model, x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < examples.size(); ++i)
        if (examples[i].label && nn::argmax(p.col(static_cast<Eigen::Index>(i))) == *examples[i].label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

namespace detail {

template <typename Rng>
double sample_beta(double alpha, Rng& rng) {
    std::gamma_distribution<double> g(alpha, 1.0);
    const double a = g(rng);
    const double b = g(rng);
    return a + b > 0.0 ? a / (a + b) : 0.5;
}

inline void accumulate(nn::LossAndGrad& total, const nn::LossAndGrad& part) {
    total.loss += part.loss;
    total.grad.add_scaled(part.grad, 1.0);
}

} // namespace detail

struct UnlabeledStep {
    nn::LossAndGrad loss;
    double mask_rate = 0.0;
    int vat_fallbacks = 0;
};

/// Method-specific unlabeled loss on the columns of `u`, scaled by `weight`.
template <typename Rng>
UnlabeledStep unlabeled_loss_and_grad(const GuessContext<Rng>& ctx, const nn::Matrix& u,
                                      const data::Augmenter& strong, double weight) {
    const auto& cfg = ctx.config;
    auto& rng = ctx.rng;
    UnlabeledStep step;
    GuessedLabels guess = guess_labels(ctx, u);
    step.mask_rate = guess.mask.mean();

    switch (cfg.method) {
    case Method::pseudo_label:
        step.loss = nn::loss_and_grad(
            ctx.student, {data::augment_batch(ctx.weak, u, rng), guess.targets, guess.mask},
            nn::LossKind::cross_entropy, weight);
        break;
    case Method::fixmatch_like:
        step.loss = nn::loss_and_grad(ctx.student, {data::augment_batch(strong, u, rng), guess.targets, guess.mask},
                                      nn::LossKind::cross_entropy, weight);
        break;
    case Method::uda_like:
        step.loss = nn::loss_and_grad(ctx.student, {data::augment_batch(strong, u, rng), guess.targets, guess.mask},
                                      nn::LossKind::kl_divergence, weight);
        break;
    case Method::mixmatch_like: {
        nn::Matrix x = data::augment_batch(ctx.weak, u, rng);
        nn::Matrix t = guess.targets;
        if (cfg.mixup && u.cols() > 1) {
            std::vector<Eigen::Index> perm(static_cast<std::size_t>(u.cols()));
            std::iota(perm.begin(), perm.end(), Eigen::Index{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            const double lam_raw = detail::sample_beta(cfg.mixup_alpha, rng);
            const double lam = std::max(lam_raw, 1.0 - lam_raw);
            nn::Matrix xm(x.rows(), x.cols()), tm(t.rows(), t.cols());
            for (Eigen::Index b = 0; b < x.cols(); ++b) {
                xm.col(b) = lam * x.col(b) + (1.0 - lam) * x.col(perm[static_cast<std::size_t>(b)]);
                tm.col(b) = lam * t.col(b) + (1.0 - lam) * t.col(perm[static_cast<std::size_t>(b)]);
            }
            x = std::move(xm);
            t = std::move(tm);
        }
        step.loss = nn::loss_and_grad(ctx.student, {x, t, {}}, nn::LossKind::squared_error, weight);
        break;
    }
    case Method::mean_teacher:
    case Method::pi_model:
        step.loss = nn::loss_and_grad(ctx.student, {data::augment_batch(ctx.weak, u, rng), guess.targets, {}},
                                      nn::LossKind::squared_error, weight);
        break;
    case Method::vat: {
        auto pert = vat_perturbation(ctx.student, u, cfg.vat_epsilon, cfg.vat_xi, rng);
        step.vat_fallbacks = pert.fallback_count;
        step.loss =
            nn::loss_and_grad(ctx.student, {u + pert.delta, guess.targets, {}}, nn::LossKind::kl_divergence, weight);
        detail::accumulate(step.loss, nn::loss_and_grad(ctx.student, {u, {}, {}}, nn::LossKind::entropy, weight));
        break;
    }
    }
    return step;
}

/// Linear warm-up of the unlabeled weight over the first `warmup_fraction` of training.
inline double ramped_weight(const TrainerConfig& cfg, int epoch, int step, int steps_per_epoch) {
    const double warm = cfg.warmup_fraction * cfg.epochs;
    if (warm <= 0.0) return cfg.lambda_u;
    const double progress = epoch + static_cast<double>(step) / steps_per_epoch;
    return cfg.lambda_u * std::min(1.0, progress / warm);
}

/// Runs `cfg.epochs` epochs. `init` replaces the seeded initialization (used for
/// resuming from known weights).
inline TrainResult train(const data::TrainingSet& data, const TrainerConfig& cfg,
                         const nn::ModelParams* init = nullptr) {
    cfg.validate();
    if (data.labeled.empty()) throw ContractError("need at least one labeled example");
    if (data.unlabeled.rows() != data.dim && data.unlabeled.cols() > 0)
        throw ShapeError("unlabeled features do not match the dataset dimension");

    TrainResult result;
    result.model = init ? *init : nn::make_model(cfg.architecture(data.dim, data.num_classes), cfg.seed);
    if (result.model.input_dim() != data.dim || result.model.num_classes() != data.num_classes)
        throw ShapeError("model shape does not match the dataset");
    nn::EmaParams teacher = nn::make_ema(result.model, cfg.ema_decay);
    nn::SgdOptimizer opt(cfg.learning_rate, cfg.momentum);

    std::mt19937_64 sup_rng(data::mix_seed(cfg.seed, 101));
    std::mt19937_64 unl_rng(data::mix_seed(cfg.seed, 202));

    const auto n_lab = static_cast<Eigen::Index>(data.labeled.size());
    nn::Matrix lab_x(data.dim, n_lab);
    std::vector<int> lab_y(data.labeled.size());
    for (Eigen::Index i = 0; i < n_lab; ++i) {
        const auto& e = data.labeled[static_cast<std::size_t>(i)];
        if (e.features.size() != data.dim) throw ShapeError("labeled example has the wrong dimension");
        lab_x.col(i) = e.features;
        lab_y[static_cast<std::size_t>(i)] = *e.label;
    }

    const Eigen::Index n_unl = data.unlabeled.cols();
    const int steps = n_unl > 0 ? static_cast<int>((n_unl + cfg.unlabeled_batch - 1) / cfg.unlabeled_batch)
                                : static_cast<int>((n_lab + cfg.labeled_batch - 1) / cfg.labeled_batch);
    const auto weak = data::Augmenter::weak(cfg.weak_sigma);
    const auto strong = data::Augmenter::strong(cfg.strong_sigma, cfg.strong_dropout);
    const bool use_unlabeled = cfg.lambda_u > 0.0 && n_unl > 0;

    result.trace = PredictionTrace(cfg.epochs, static_cast<int>(n_unl), data.num_classes);
    result.trace.method = to_string(cfg.method);
    result.trace.seed = cfg.seed;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_unl));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::uniform_int_distribution<Eigen::Index> pick(0, n_lab - 1);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (use_unlabeled) std::shuffle(order.begin(), order.end(), unl_rng);
        double sup_sum = 0.0, unl_sum = 0.0, mask_sum = 0.0;
        for (int s = 0; s < steps; ++s) {
            nn::Matrix xb(data.dim, cfg.labeled_batch);
            std::vector<int> yb(static_cast<std::size_t>(cfg.labeled_batch));
            for (int b = 0; b < cfg.labeled_batch; ++b) {
                const auto i = pick(sup_rng);
                xb.col(b) = lab_x.col(i);
                yb[static_cast<std::size_t>(b)] = lab_y[static_cast<std::size_t>(i)];
            }
            nn::LossAndGrad total = nn::loss_and_grad(
                result.model, {data::augment_batch(weak, xb, sup_rng), nn::one_hot(yb, data.num_classes), {}},
                nn::LossKind::cross_entropy);
            sup_sum += total.loss;

            if (use_unlabeled) {
                const Eigen::Index begin = static_cast<Eigen::Index>(s) * cfg.unlabeled_batch;
                const Eigen::Index end = std::min<Eigen::Index>(begin + cfg.unlabeled_batch, n_unl);
                nn::Matrix ub(data.dim, end - begin);
                for (Eigen::Index b = begin; b < end; ++b)
                    ub.col(b - begin) = data.unlabeled.col(order[static_cast<std::size_t>(b)]);
                GuessContext<std::mt19937_64> ctx{cfg, result.model, &teacher.shadow, weak, unl_rng};
                const double w = ramped_weight(cfg, epoch, s, steps);
                UnlabeledStep u = unlabeled_loss_and_grad(ctx, ub, strong, w);
                unl_sum += u.loss.loss;
                mask_sum += u.mask_rate;
                result.metrics.vat_fallbacks += u.vat_fallbacks;
                detail::accumulate(total, u.loss);
            }
            if (!std::isfinite(total.loss)) throw TrainingAborted("non-finite loss", cfg.seed, epoch, s);
            opt.step(result.model, total.grad);
            if (cfg.method == Method::mean_teacher) teacher = nn::ema_update(std::move(teacher), result.model);
        }
        result.metrics.supervised_loss.push_back(sup_sum / steps);
        result.metrics.unlabeled_loss.push_back(unl_sum / steps);
        result.metrics.mask_rate.push_back(use_unlabeled ? mask_sum / steps : 0.0);
        if (n_unl > 0) result.trace.append_epoch(nn::forward_batch(result.model, data.unlabeled));
        else ++result.trace.epochs;
        if (!data.test.empty()) result.metrics.test_accuracy.push_back(accuracy(result.model, data.test));
    }
    return result;
}

} // namespace sslpoison::ssl
