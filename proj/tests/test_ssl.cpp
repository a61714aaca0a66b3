#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/ssl/trainer.hpp"

using namespace sslpoison;
using namespace sslpoison::ssl;

namespace {

// A one-layer model whose output is the same distribution p for every input.
nn::ModelParams constant_model(const nn::Vector& p, int dim = 2) {
    auto m = nn::make_model({dim, {}, static_cast<int>(p.size()), nn::Activation::tanh}, 0).zeros_like();
    m.layers[0].bias = p.array().log().matrix();
    return m;
}

data::TrainingSet small_moons(std::uint64_t seed, int unlabeled = 200) {
    data::DatasetSpec s;
    s.labeled = 20;
    s.unlabeled = unlabeled;
    s.test = 100;
    return data::training_view(data::make_dataset(s, seed));
}

TrainerConfig quick(Method m, int epochs = 4) {
    TrainerConfig c;
    c.method = m;
    c.epochs = epochs;
    c.hidden = {16};
    return c;
}

} // namespace

TEST(Sharpen, HalfTemperatureExample) {
    const nn::Vector s = sharpen(nn::Vector((nn::Vector(2) << 0.6, 0.4).finished()), 0.5);
    EXPECT_NEAR(s(0), 0.6923, 1e-4);
    EXPECT_NEAR(s(1), 0.3077, 1e-4);
    EXPECT_NEAR(s(0), 0.36 / 0.52, 1e-12);
}

TEST(Sharpen, TemperatureOneIsIdentityAndZeroIsError) {
    const nn::Vector p = (nn::Vector(3) << 0.2, 0.5, 0.3).finished();
    EXPECT_TRUE(sharpen(p, 1.0).isApprox(p, 1e-12));
    EXPECT_THROW(sharpen(p, 0.0), ContractError);
}

TEST(Guess, ConfidentFixMatchPredictionIsKept) {
    TrainerConfig cfg;
    cfg.method = Method::fixmatch_like;
    cfg.threshold = 0.95;
    std::mt19937_64 rng(0);
    const auto model = constant_model((nn::Vector(2) << 0.97, 0.03).finished());
    GuessContext<std::mt19937_64> ctx{cfg, model, nullptr, data::Augmenter::weak(0.0), rng};
    const auto g = guess_label(ctx, nn::Vector::Zero(2));
    EXPECT_TRUE(g.train);
    EXPECT_EQ(g.soft, (nn::Vector(2) << 1.0, 0.0).finished());
}

TEST(Guess, UnconfidentFixMatchPredictionIsSkipped) {
    TrainerConfig cfg;
    cfg.method = Method::fixmatch_like;
    cfg.threshold = 0.95;
    std::mt19937_64 rng(0);
    const auto model = constant_model((nn::Vector(2) << 0.80, 0.20).finished());
    GuessContext<std::mt19937_64> ctx{cfg, model, nullptr, data::Augmenter::weak(0.0), rng};
    EXPECT_FALSE(guess_label(ctx, nn::Vector::Zero(2)).train);
}

TEST(Guess, SoftMethodsAlwaysTrain) {
    std::mt19937_64 rng(0);
    const nn::Vector p = (nn::Vector(2) << 0.6, 0.4).finished();
    const auto model = constant_model(p);
    for (Method m : {Method::pi_model, Method::mean_teacher, Method::vat, Method::mixmatch_like}) {
        TrainerConfig cfg;
        cfg.method = m;
        GuessContext<std::mt19937_64> ctx{cfg, model, nullptr, data::Augmenter::weak(0.0), rng};
        const auto g = guess_label(ctx, nn::Vector::Zero(2));
        EXPECT_TRUE(g.train) << to_string(m);
        if (m == Method::mixmatch_like)
            EXPECT_NEAR(g.soft(0), 0.6923, 1e-4);
        else
            EXPECT_TRUE(g.soft.isApprox(p, 1e-12)) << to_string(m);
    }
}

TEST(Guess, MeanTeacherUsesTheTeacher) {
    TrainerConfig cfg;
    cfg.method = Method::mean_teacher;
    std::mt19937_64 rng(0);
    const auto student = constant_model((nn::Vector(2) << 0.5, 0.5).finished());
    const auto teacher = constant_model((nn::Vector(2) << 0.9, 0.1).finished());
    GuessContext<std::mt19937_64> ctx{cfg, student, &teacher, data::Augmenter::weak(0.0), rng};
    EXPECT_NEAR(guess_label(ctx, nn::Vector::Zero(2)).soft(0), 0.9, 1e-12);
}

TEST(Guess, MaskedOutBatchContributesNoGradient) {
    TrainerConfig cfg;
    cfg.method = Method::fixmatch_like;
    cfg.threshold = 0.99;
    std::mt19937_64 rng(0);
    const auto model = nn::make_model({2, {8}, 2, nn::Activation::tanh}, 0);
    GuessContext<std::mt19937_64> ctx{cfg, model, nullptr, data::Augmenter::weak(0.0), rng};
    const nn::Matrix u = nn::Matrix::Constant(2, 5, 0.01);
    ASSERT_LT(nn::forward_batch(model, u).maxCoeff(), 0.99);
    const auto step = unlabeled_loss_and_grad(ctx, u, data::Augmenter::strong(0.1, 0.1), 1.0);
    EXPECT_EQ(step.mask_rate, 0.0);
    EXPECT_EQ(step.loss.loss, 0.0);
    step.loss.grad.for_each([](double g) { EXPECT_EQ(g, 0.0); });
}

TEST(Vat, PerturbationHasRadiusEpsilon) {
    std::mt19937_64 rng(4);
    const auto model = nn::make_model({3, {8}, 2, nn::Activation::tanh}, 2);
    const nn::Matrix u = nn::Matrix::Random(3, 6) * 0.5;
    const auto r = vat_perturbation(model, u, 0.1, 1e-3, rng);
    for (Eigen::Index b = 0; b < u.cols(); ++b) EXPECT_NEAR(r.delta.col(b).norm(), 0.1, 1e-12);
}

TEST(Vat, ZeroRadiusGivesZeroVector) {
    std::mt19937_64 rng(4);
    const auto model = nn::make_model({3, {8}, 2, nn::Activation::tanh}, 2);
    EXPECT_EQ(vat_perturbation(model, nn::Vector(nn::Vector::Zero(3)), 0.0, 1e-3, rng), nn::Vector(nn::Vector::Zero(3)));
}

TEST(Vat, AlignsWithTheLogisticDirection) {
    // For a linear softmax the KL-increasing direction is the logit-difference normal.
    auto model = nn::make_model({2, {}, 2, nn::Activation::tanh}, 0);
    model.layers[0].weight << 1.5, -0.5, 0.0, 0.0;
    model.layers[0].bias.setZero();
    const nn::Vector w = (nn::Vector(2) << 1.5, -0.5).finished().normalized();
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        bool fallback = true;
        const nn::Vector r = vat_perturbation(model, nn::Vector(nn::Vector::Constant(2, 0.1 * i - 1.0)), 0.2, 1e-2, rng, &fallback);
        EXPECT_FALSE(fallback);
        EXPECT_GT(std::abs(r.normalized().dot(w)), 0.999);
    }
}

TEST(Vat, FlatModelFallsBackToRandomDirection) {
    std::mt19937_64 rng(1);
    const auto model = nn::make_model({2, {}, 2, nn::Activation::tanh}, 0).zeros_like();
    bool fallback = false;
    const nn::Vector r = vat_perturbation(model, nn::Vector(nn::Vector::Zero(2)), 0.3, 1e-3, rng, &fallback);
    EXPECT_TRUE(fallback);
    EXPECT_NEAR(r.norm(), 0.3, 1e-12);
}

TEST(Trainer, TraceHasOneRowPerEpochAndExample) {
    const auto data = small_moons(1);
    const auto r = train(data, quick(Method::fixmatch_like, 5));
    EXPECT_EQ(r.trace.epochs, 5);
    EXPECT_EQ(r.trace.examples, 200);
    EXPECT_EQ(r.trace.classes, 2);
    ASSERT_EQ(r.trace.values.size(), 5u * 200u * 2u);
    for (int t = 0; t < 5; ++t) EXPECT_NEAR(r.trace.prediction(t, 17).sum(), 1.0, 1e-9);
    // the last trace row is the final model's prediction
    const nn::Vector last = nn::forward(r.model, data.unlabeled.col(17));
    EXPECT_TRUE(r.trace.prediction(4, 17).isApprox(last, 1e-12));
    EXPECT_EQ(r.metrics.test_accuracy.size(), 5u);
}

TEST(Trainer, SameSeedIsDeterministic) {
    const auto data = small_moons(2);
    for (Method m : kAllMethods) {
        const auto a = train(data, quick(m, 3));
        const auto b = train(data, quick(m, 3));
        EXPECT_TRUE(a.model == b.model) << to_string(m);
        EXPECT_TRUE(a.trace == b.trace) << to_string(m);
    }
}

TEST(Trainer, ZeroUnlabeledWeightMakesAllMethodsIdentical) {
    const auto data = small_moons(3);
    auto base = quick(Method::pseudo_label, 3);
    base.lambda_u = 0.0;
    const auto ref = train(data, base);
    for (Method m : kAllMethods) {
        auto c = base;
        c.method = m;
        const auto r = train(data, c);
        EXPECT_TRUE(r.model == ref.model) << to_string(m);
        EXPECT_EQ(r.trace.values, ref.trace.values) << to_string(m);
    }
}

TEST(Trainer, MeanTeacherWithZeroDecayRuns) {
    auto c = quick(Method::mean_teacher, 3);
    c.ema_decay = 0.0;
    const auto r = train(small_moons(4), c);
    EXPECT_TRUE(r.model.well_formed());
    for (double v : r.trace.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Trainer, WarmupRampsLinearly) {
    TrainerConfig c;
    c.epochs = 100;
    c.lambda_u = 2.0;
    c.warmup_fraction = 0.1;
    EXPECT_DOUBLE_EQ(ramped_weight(c, 0, 0, 10), 0.0);
    EXPECT_DOUBLE_EQ(ramped_weight(c, 5, 0, 10), 1.0);
    EXPECT_DOUBLE_EQ(ramped_weight(c, 50, 3, 10), 2.0);
    c.warmup_fraction = 0.0;
    EXPECT_DOUBLE_EQ(ramped_weight(c, 0, 0, 10), 2.0);
}

TEST(Trainer, InvalidConfigsAreRejected) {
    auto c = quick(Method::vat);
    c.epochs = 1;
    EXPECT_THROW(train(small_moons(0), c), ConfigError);
    c = quick(Method::vat);
    c.threshold = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(method_from_string("co-training"), ConfigError);
}

TEST(Trace, RoundTripAndShapeErrors) {
    PredictionTrace t(2, 3, 2);
    t.method = "vat";
    t.seed = 9;
    nn::Matrix p(2, 3);
    p << 0.25, 0.5, 0.123456789, 0.75, 0.5, 0.876543211;
    t.append_epoch(p);
    t.append_epoch(p.rowwise().reverse());
    std::stringstream ss;
    write_trace(ss, t);
    const auto back = read_trace(ss);
    EXPECT_EQ(back.epochs, 2);
    EXPECT_EQ(back.method, "vat");
    EXPECT_EQ(back.seed, 9u);
    for (std::size_t k = 0; k < t.values.size(); ++k) EXPECT_NEAR(back.values[k], t.values[k], 1e-9);
    EXPECT_THROW(t.append_epoch(nn::Matrix::Zero(2, 4)), ShapeError);
    std::stringstream bad("sslpoison-trace 1\nepochs 5\n");
    EXPECT_THROW(read_trace(bad), FormatError);
}
