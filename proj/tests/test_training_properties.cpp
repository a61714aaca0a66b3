#include <gtest/gtest.h>

#include <cstdio>

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/harness/curves.hpp"
#include "sslpoison/harness/stats.hpp"
#include "sslpoison/ssl/trainer.hpp"

using namespace sslpoison;
using namespace sslpoison::ssl;

TEST(TrainingProperties, FixMatchBeatsSupervisedOnTwoMoons) {
    data::DatasetSpec spec;  // 40 labeled, 5000 unlabeled, 1000 test
    int good = 0, ssl_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = data::training_view(data::make_dataset(spec, seed));
        TrainerConfig c;
        c.seed = seed;
        const double ssl_acc = accuracy(train(data, c).model, data.test);
        c.lambda_u = 0.0;
        const double sup_acc = accuracy(train(data, c).model, data.test);
        std::printf("seed %llu  fixmatch-like %.3f  supervised %.3f\n", static_cast<unsigned long long>(seed), ssl_acc,
                    sup_acc);
        good += ssl_acc >= 0.95;
        ssl_wins += ssl_acc > sup_acc;
    }
    EXPECT_GE(good, 8);
    EXPECT_GE(ssl_wins, 8);
}

TEST(TrainingProperties, GuessedLabelsImproveOverEpochsOnBlobs) {
    // Fraction of unlabeled points whose guessed label matches the hidden truth,
    // per epoch, should rise with the epoch index. A small learning rate keeps the
    // climb spread over the run instead of saturating in the first epoch.
    data::DatasetSpec spec;
    spec.kind = data::DatasetKind::gaussian_blobs;
    spec.classes = 5;
    spec.labeled = 10;
    spec.unlabeled = 600;
    spec.test = 100;
    spec.noise = 0.15;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto bundle = data::make_dataset(spec, seed);
        TrainerConfig c;
        c.epochs = 40;
        c.learning_rate = 3e-4;
        c.seed = seed;
        const auto r = train(data::training_view(bundle), c);
        std::vector<double> epoch, correct;
        for (int t = 0; t < r.trace.epochs; ++t) {
            int hits = 0;
            for (int i = 0; i < r.trace.examples; ++i) {
                int best = 0;
                for (int k = 1; k < r.trace.classes; ++k)
                    if (r.trace.at(t, i, k) > r.trace.at(t, i, best)) best = k;
                hits += best == *bundle.unlabeled[static_cast<std::size_t>(i)].label;
            }
            epoch.push_back(t);
            correct.push_back(static_cast<double>(hits) / r.trace.examples);
        }
        const double rho = harness::spearman(epoch, correct);
        std::printf("seed %llu  correct-guess fraction %.3f -> %.3f, spearman %.3f\n",
                    static_cast<unsigned long long>(seed), correct.front(), correct.back(), rho);
        EXPECT_GE(rho, 0.8) << "seed " << seed;
    }
}
