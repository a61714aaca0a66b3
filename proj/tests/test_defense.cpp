#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/defense/cluster.hpp"
#include "sslpoison/defense/collinear.hpp"
#include "sslpoison/defense/influence.hpp"
#include "sslpoison/poison/bridge.hpp"
#include "sslpoison/ssl/trainer.hpp"

using namespace sslpoison;
using namespace sslpoison::defense;
using ssl::PredictionTrace;

namespace {

PredictionTrace random_trace(int K, int N, int C, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    PredictionTrace t(K, N, C);
    for (int e = 0; e < K; ++e) {
        nn::Matrix p(C, N);
        for (int j = 0; j < N; ++j) {
            for (int c = 0; c < C; ++c) p(c, j) = u(rng);
            p.col(j) /= p.col(j).sum();
        }
        t.append_epoch(p);
    }
    return t;
}

PredictionTrace constant_trace(int K, const nn::Matrix& p) {
    PredictionTrace t(K, static_cast<int>(p.cols()), static_cast<int>(p.rows()));
    for (int e = 0; e < K; ++e) t.append_epoch(p);
    return t;
}

// Flattens per-epoch predictions into plain vectors and builds both windows by hand.
double influence_oracle(const PredictionTrace& t, int i, int j) {
    const int K = t.epochs, C = t.classes;
    std::vector<double> a, b;
    for (int e = 0; e + 1 < K - 1; ++e)
        for (int c = 0; c < C; ++c) a.push_back(t.at(e + 1, i, c) - t.at(e, i, c));
    for (int c = 0; c < C; ++c) a.push_back(t.at(K - 2, i, c));
    for (int e = 1; e + 1 < K; ++e)
        for (int c = 0; c < C; ++c) b.push_back(t.at(e + 1, j, c) - t.at(e, j, c));
    for (int c = 0; c < C; ++c) b.push_back(t.at(K - 1, j, c));
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

PredictionTrace permuted(const PredictionTrace& t, const std::vector<int>& perm) {
    PredictionTrace out(t.epochs, t.examples, t.classes);
    for (int e = 0; e < t.epochs; ++e) {
        nn::Matrix p(t.classes, t.examples);
        for (int j = 0; j < t.examples; ++j) p.col(j) = t.prediction(e, perm[static_cast<std::size_t>(j)]);
        out.append_epoch(p);
    }
    return out;
}

nn::Matrix uniform_points(int d, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    nn::Matrix m(d, n);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
    return m;
}

// Appends a noiseless 1.5-x bridge between a and b as the last `count` columns.
nn::Matrix with_bridge(const nn::Matrix& base, const nn::Vector& a, const nn::Vector& b, int count) {
    poison::PoisonSpec s;
    s.source = a;
    s.target = b;
    s.budget = count;
    const auto p = poison::build_bridge(s);
    nn::Matrix out(base.rows(), base.cols() + count);
    out.leftCols(base.cols()) = base;
    for (int i = 0; i < count; ++i) out.col(base.cols() + i) = p.points[static_cast<std::size_t>(i)].features;
    return out;
}

} // namespace

TEST(Deltas, WorkedExample) {
    nn::Matrix f0(2, 1), f1(2, 1);
    f0 << 0.7, 0.3;
    f1 << 0.6, 0.4;
    PredictionTrace t(2, 1, 2);
    t.append_epoch(f0);
    t.append_epoch(f1);
    const auto d = prediction_deltas(t);
    EXPECT_EQ(d.steps, 1);
    EXPECT_NEAR(d.at(0, 0, 0), -0.1, 1e-12);
    EXPECT_NEAR(d.at(0, 0, 1), 0.1, 1e-12);
}

TEST(Deltas, ConstantTraceIsZeroAndSumTelescopes) {
    for (double v : prediction_deltas(constant_trace(4, nn::Matrix::Constant(3, 5, 1.0 / 3))).values) EXPECT_EQ(v, 0.0);
    const auto t = random_trace(7, 4, 3, 1);
    const auto d = prediction_deltas(t);
    for (int j = 0; j < 4; ++j)
        for (int c = 0; c < 3; ++c) {
            double s = 0;
            for (int e = 0; e < d.steps; ++e) s += d.at(e, j, c);
            EXPECT_NEAR(s, t.at(6, j, c) - t.at(0, j, c), 1e-12);
        }
    EXPECT_THROW(prediction_deltas(random_trace(1, 3, 2, 0)), ContractError);
}

TEST(Influence, ExactLagFollowerScoresZero) {
    // u_1 repeats u_0 one epoch later and ends where u_0 would have gone.
    const std::vector<double> seq{0.5, 0.55, 0.7, 0.9, 0.95, 0.97};
    PredictionTrace t(5, 2, 2);
    for (int e = 0; e < 5; ++e) {
        nn::Matrix p(2, 2);
        p.col(0) << seq[static_cast<std::size_t>(e)], 1 - seq[static_cast<std::size_t>(e)];
        const double lagged = e == 0 ? seq[0] : seq[static_cast<std::size_t>(e) - 1];
        p.col(1) << lagged, 1 - lagged;
        t.append_epoch(p);
    }
    EXPECT_NEAR(influence(t, 0, 1), 0.0, 1e-24);
    EXPECT_GT(influence(t, 1, 0), 1e-3);
}

TEST(Influence, ConstantTraceGivesSquaredDistanceOfPredictions) {
    nn::Matrix p(2, 2);
    p << 0.9, 0.2, 0.1, 0.8;
    const auto t = constant_trace(5, p);
    EXPECT_NEAR(influence(t, 0, 1), (p.col(0) - p.col(1)).squaredNorm(), 1e-15);
    EXPECT_NEAR(influence(t, 0, 1), 0.98, 1e-12);
}

TEST(Influence, MatchesFlattenedOracle) {
    const auto t = random_trace(9, 12, 3, 5);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) EXPECT_NEAR(influence(t, i, j), influence_oracle(t, i, j), 1e-9);
}

TEST(Influence, Contracts) {
    const auto t = random_trace(4, 5, 2, 0);
    EXPECT_THROW(influence(t, 0, 5), ContractError);
    EXPECT_THROW(influence(t, -1, 0), ContractError);
    EXPECT_THROW(influence(random_trace(2, 5, 2, 0), 0, 1), ContractError);
    EXPECT_THROW(influence_report(t, {5, 1.0, 1}), ContractError);
    EXPECT_THROW(influence_report(t, {0, 1.0, 1}), ContractError);
}

TEST(InfluenceReport, ScoresAreMeanOfKSmallestExcludingSelf) {
    const auto t = random_trace(6, 40, 3, 8);
    const auto r = influence_report(t, {4, 1.0, 1});
    for (int i = 0; i < 40; ++i) {
        std::vector<double> v;
        for (int j = 0; j < 40; ++j)
            if (j != i) v.push_back(influence_oracle(t, i, j));
        std::sort(v.begin(), v.end());
        EXPECT_NEAR(r.scores[static_cast<std::size_t>(i)], (v[0] + v[1] + v[2] + v[3]) / 4, 1e-12);
    }
}

TEST(InfluenceReport, ThreadedEqualsSerial) {
    const auto t = random_trace(5, 700, 2, 3);
    const auto a = influence_report(t, {5, 1.0, 1});
    const auto b = influence_report(t, {5, 1.0, 4});
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.flagged, b.flagged);
}

TEST(InfluenceReport, PermutationPermutesTheReport) {
    const auto t = random_trace(6, 60, 3, 12);
    std::vector<int> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
    const auto a = influence_report(t);
    const auto b = influence_report(permuted(t, perm));
    for (int j = 0; j < 60; ++j)
        EXPECT_NEAR(b.scores[static_cast<std::size_t>(j)], a.scores[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])],
                    1e-12);
}

TEST(InfluenceReport, PlantedFollowersAreFlaggedAlone) {
    // 50 random benign trajectories plus a chain of 8 points each repeating the
    // previous one a step later; the chain is what a bridge looks like.
    const int K = 12, benign = 50, chain = 8;
    auto noise = random_trace(K, benign, 2, 21);
    std::vector<double> lead(K + chain);
    for (int s = 0; s < K + chain; ++s) lead[static_cast<std::size_t>(s)] = 0.5 + 0.45 * std::tanh(0.4 * (s - 8));
    PredictionTrace t(K, benign + chain, 2);
    for (int e = 0; e < K; ++e) {
        nn::Matrix p(2, benign + chain);
        for (int j = 0; j < benign; ++j) p.col(j) = noise.prediction(e, j);
        for (int c = 0; c < chain; ++c) {
            const double v = lead[static_cast<std::size_t>(std::max(0, e + chain - c))];
            p.col(benign + c) << v, 1 - v;
        }
        t.append_epoch(p);
    }
    const auto r = influence_report(t, {1, 1.0, 1});
    std::vector<int> want;
    // every chain member except the last has an exact follower
    for (int c = 0; c + 1 < chain; ++c) want.push_back(benign + c);
    EXPECT_EQ(r.flagged, want);
    EXPECT_GE(r.gap_decades, 1.0);
    std::stringstream ss;
    write_influence_report(ss, r);
    EXPECT_NE(ss.str().find("# flagged 7 of 58"), std::string::npos);
}

TEST(InfluenceReport, NoGapFlagsNothing) {
    const auto r = influence_report(constant_trace(4, nn::Matrix::Constant(2, 10, 0.5)));
    EXPECT_TRUE(r.flagged.empty());
    EXPECT_EQ(r.threshold, 0.0);
}

TEST(InfluenceReport, DuplicatedExampleScoresNearTheBottom) {
    data::DatasetSpec s;
    s.dim = 2;
    s.labeled = 20;
    s.unlabeled = 400;
    s.test = 10;
    auto b = data::make_dataset(s, 6);
    b.unlabeled.push_back(b.unlabeled[123]);
    b.poison.push_back(false);
    ssl::TrainerConfig c;
    c.epochs = 30;
    c.hidden = {32, 32};
    const auto r = influence_report(ssl::train(data::training_view(b), c).trace);
    std::vector<double> sorted = r.scores;
    std::sort(sorted.begin(), sorted.end());
    const double cutoff = sorted[sorted.size() / 20];  // 5th percentile
    EXPECT_LE(r.scores[123], cutoff);
    EXPECT_LE(r.scores[400], cutoff);
}

TEST(Collinear, PlantedBridgeAmongRandomPoints) {
    const nn::Matrix u = with_bridge(uniform_points(2, 1000, 3), (nn::Vector(2) << -0.7, 0.2).finished(),
                                     (nn::Vector(2) << 0.6, -0.5).finished(), 20);
    const auto flagged = detect_collinear(u, {1e-6, 5, 2000, 3, 9});
    std::vector<int> want(20);
    std::iota(want.begin(), want.end(), 1000);
    EXPECT_EQ(flagged, want);
}

TEST(Collinear, ThreePointsInGeneralPositionGiveNothing) {
    EXPECT_TRUE(detect_collinear(uniform_points(2, 3, 1), {1e-6, 3, 100, 3, 0}).empty());
    EXPECT_TRUE(detect_collinear(uniform_points(2, 2, 1), {}).empty());
}

TEST(Collinear, DeterministicGivenSeedAndContracts) {
    const nn::Matrix u = with_bridge(uniform_points(3, 200, 2), nn::Vector::Constant(3, -0.5), nn::Vector::Constant(3, 0.5), 10);
    EXPECT_EQ(detect_collinear(u, {1e-6, 5, 300, 3, 4}), detect_collinear(u, {1e-6, 5, 300, 3, 4}));
    EXPECT_THROW(detect_collinear(u, {0.0, 5, 10, 3, 0}), ContractError);
    EXPECT_THROW(detect_collinear(u, {1e-6, 2, 10, 3, 0}), ContractError);
}

TEST(Collinear, NoisyBridgeEscapesDetection) {
    nn::Matrix u = uniform_points(2, 1000, 3);
    poison::PoisonSpec s;
    s.source = (nn::Vector(2) << -0.7, 0.2).finished();
    s.target = (nn::Vector(2) << 0.6, -0.5).finished();
    s.budget = 20;
    s.noise_sigma = 0.1;
    const auto p = poison::build_bridge(s);
    u.conservativeResize(2, 1020);
    for (int i = 0; i < 20; ++i) u.col(1000 + i) = p.points[static_cast<std::size_t>(i)].features;
    EXPECT_LT(detect_collinear(u).size(), 20u);
}

TEST(Cluster, TwoSeparatedBlobs) {
    nn::Matrix u = uniform_points(2, 40, 5) * 0.05;
    u.rightCols(20).array() += 0.8;
    const auto r = agglomerative_filter(u, 0.4);
    EXPECT_EQ(r.clusters, 2);
    EXPECT_EQ(r.cluster_sizes, (std::vector<int>{20, 20}));
    for (int i = 0; i < 20; ++i) EXPECT_EQ(r.assignment[static_cast<std::size_t>(i)], 0);
    for (int i = 20; i < 40; ++i) EXPECT_EQ(r.assignment[static_cast<std::size_t>(i)], 1);
}

TEST(Cluster, ZeroThresholdGivesSingletons) {
    const auto r = agglomerative_filter(uniform_points(3, 25, 1), 0.0);
    EXPECT_EQ(r.clusters, 25);
    EXPECT_EQ(r.removed_cluster, 0);
    EXPECT_THROW(agglomerative_filter(uniform_points(3, 1, 1), 0.1), ContractError);
    EXPECT_THROW(agglomerative_filter(uniform_points(3, 4, 1), -1.0), ContractError);
}

TEST(Cluster, AverageLinkageMatchesBruteForce) {
    // Naive O(n^3) average linkage as the oracle.
    const nn::Matrix u = uniform_points(2, 30, 17);
    std::vector<std::vector<int>> clusters;
    for (int i = 0; i < 30; ++i) clusters.push_back({i});
    std::vector<double> naive;
    while (clusters.size() > 1) {
        double best = 1e300;
        std::size_t ba = 0, bb = 0;
        for (std::size_t a = 0; a < clusters.size(); ++a)
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                double s = 0;
                for (int x : clusters[a])
                    for (int y : clusters[b]) s += (u.col(x) - u.col(y)).norm();
                s /= static_cast<double>(clusters[a].size() * clusters[b].size());
                if (s < best) best = s, ba = a, bb = b;
            }
        naive.push_back(best);
        clusters[ba].insert(clusters[ba].end(), clusters[bb].begin(), clusters[bb].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
    }
    const auto merges = average_linkage(u);
    ASSERT_EQ(merges.size(), naive.size());
    std::sort(naive.begin(), naive.end());
    for (std::size_t i = 0; i < naive.size(); ++i) EXPECT_NEAR(merges[i].distance, naive[i], 1e-12);
}

TEST(Cluster, PlantedBridgeIsTheLargestClusterForSomeThresholds) {
    const nn::Matrix u = with_bridge(uniform_points(5, 500, 8), nn::Vector::Constant(5, 0.1),
                                     nn::Vector::Constant(5, 0.18), 20);
    std::vector<int> bridge(20);
    std::iota(bridge.begin(), bridge.end(), 500);
    int window = 0;
    for (double t = 0.01; t <= 0.6; t += 0.01) {
        const auto r = agglomerative_filter(u, t);
        window += r.members(r.removed_cluster) == bridge;
    }
    EXPECT_GE(window, 3);
}
