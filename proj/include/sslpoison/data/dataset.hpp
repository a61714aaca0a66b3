#pragma once

// Seeded synthetic datasets split into labeled, unlabeled and test sets.
//
// Every feature lies in the box [-1, 1]^d. Unlabeled examples keep their true
// class so that experiments can score outcomes, but trainers only ever see a
// TrainingSet, which carries unlabeled features and nothing else.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sslpoison/errors.hpp"

namespace sslpoison::data {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kFeatureMin = -1.0;
inline constexpr double kFeatureMax = 1.0;

struct Example {
    Vector features;
    std::optional<int> label;

    bool operator==(const Example& o) const {
        return label == o.label && features.size() == o.features.size() && features == o.features;
    }
};

enum class DatasetKind { two_moons, gaussian_blobs, ring, raster_digits_lite };

inline std::string to_string(DatasetKind k) {
    switch (k) {
    case DatasetKind::two_moons: return "two-moons";
    case DatasetKind::gaussian_blobs: return "gaussian-blobs";
    case DatasetKind::ring: return "ring";
    case DatasetKind::raster_digits_lite: return "raster-digits-lite";
    }
    return "?";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "two-moons") return DatasetKind::two_moons;
    if (s == "gaussian-blobs") return DatasetKind::gaussian_blobs;
    if (s == "ring") return DatasetKind::ring;
    if (s == "raster-digits-lite") return DatasetKind::raster_digits_lite;
    throw ConfigError("unknown dataset kind '" + s + "'");
}

/// Sizes and shape knobs. Zero / negative values select the kind's default.
struct DatasetSpec {
    DatasetKind kind = DatasetKind::two_moons;
    int labeled = 40;
    int unlabeled = 5000;
    int test = 1000;
    int classes = 0;      // two-moons: 2, ring: 2, blobs: 3, raster: 10
    int dim = 0;          // two-moons: 20, ring/blobs: 2, raster: 64 (fixed)
    double noise = -1.0;  // in-manifold noise scale
    double extra_noise = 0.1;  // std of the non-informative coordinates (dim > 2)
};

struct DatasetBundle {
    std::string kind;
    int dim = 0;
    int num_classes = 0;
    std::uint64_t seed = 0;
    std::vector<Example> labeled;
    /// Unlabeled pool. `label` holds the hidden ground truth (empty for injected points).
    std::vector<Example> unlabeled;
    /// Provenance of each unlabeled entry: true for injected poison.
    std::vector<bool> poison;
    std::vector<Example> test;

    bool operator==(const DatasetBundle& o) const = default;

    std::vector<int> poison_indices() const {
        std::vector<int> idx;
        for (std::size_t i = 0; i < poison.size(); ++i)
            if (poison[i]) idx.push_back(static_cast<int>(i));
        return idx;
    }

    Matrix unlabeled_features() const {
        Matrix m(dim, static_cast<Eigen::Index>(unlabeled.size()));
        for (std::size_t i = 0; i < unlabeled.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = unlabeled[i].features;
        return m;
    }
};

/// What a trainer is allowed to see: labeled examples and bare unlabeled features.
struct TrainingSet {
    int dim = 0;
    int num_classes = 0;
    std::vector<Example> labeled;
    Matrix unlabeled;  // dim x |U|
    std::vector<Example> test;  // evaluation only
};

inline TrainingSet training_view(const DatasetBundle& b) {
    return TrainingSet{b.dim, b.num_classes, b.labeled, b.unlabeled_features(), b.test};
}

inline Vector clip_to_box(Vector v) { return v.cwiseMax(kFeatureMin).cwiseMin(kFeatureMax); }

/// splitmix64 finalizer, used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace detail {

// 8x8 glyphs, '#' = ink.
inline const std::array<std::array<const char*, 8>, 10>& glyphs() {
    static const std::array<std::array<const char*, 8>, 10> g{{
        {"..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####.."},
        {"...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####.."},
        {"..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."},
        {"..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."},
        {"....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#..", ".....#.."},
        {".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."},
        {"..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
        {".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."},
        {"..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."},
        {"..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "......#.", "..####.."},
    }};
    return g;
}

struct Generator {
    DatasetSpec spec;
    int classes;
    int dim;
    double noise;

    Vector sample(int cls, std::mt19937_64& rng) const {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Vector x = Vector::Zero(dim);
        switch (spec.kind) {
        case DatasetKind::two_moons: {
            const double t = std::numbers::pi * unif(rng);
            double px = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
            double py = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
            px += noise * gauss(rng);
            py += noise * gauss(rng);
            x(0) = (px - 0.5) / 2.0;
            x(1) = (py - 0.25) / 2.0;
            break;
        }
        case DatasetKind::gaussian_blobs: {
            const double angle = 2.0 * std::numbers::pi * cls / classes;
            x(0) = 0.6 * std::cos(angle) + noise * gauss(rng);
            x(1) = 0.6 * std::sin(angle) + noise * gauss(rng);
            break;
        }
        case DatasetKind::ring: {
            const double radius = 0.85 * (cls + 1) / classes;
            const double angle = 2.0 * std::numbers::pi * unif(rng);
            const double r = radius + noise * gauss(rng);
            x(0) = r * std::cos(angle);
            x(1) = r * std::sin(angle);
            break;
        }
        case DatasetKind::raster_digits_lite: {
            const auto& glyph = glyphs()[static_cast<std::size_t>(cls)];
            std::uniform_int_distribution<int> shift(-1, 1);
            const int dx = shift(rng);
            const int dy = shift(rng);
            for (int r = 0; r < 8; ++r)
                for (int c = 0; c < 8; ++c) {
                    const int sr = r - dy;
                    const int sc = c - dx;
                    const bool ink = sr >= 0 && sr < 8 && sc >= 0 && sc < 8 && glyph[sr][sc] == '#';
                    x(r * 8 + c) = (ink ? 0.8 : -0.8) + noise * gauss(rng);
                }
            return clip_to_box(std::move(x));
        }
        }
        for (Eigen::Index k = 2; k < x.size(); ++k) x(k) = spec.extra_noise * gauss(rng);
        return clip_to_box(std::move(x));
    }

    /// `count` examples; classes assigned round-robin then shuffled, so the split is balanced.
    std::vector<Example> split(int count, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::vector<int> cls(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) cls[static_cast<std::size_t>(i)] = i % classes;
        std::shuffle(cls.begin(), cls.end(), rng);
        std::vector<Example> out;
        out.reserve(cls.size());
        for (int c : cls) out.push_back(Example{sample(c, rng), c});
        return out;
    }
};

} // namespace detail

/// Resolves kind defaults and validates sizes.
inline DatasetSpec resolve(DatasetSpec s) {
    if (s.labeled <= 0 || s.unlabeled <= 0 || s.test <= 0) throw ConfigError("dataset sizes must be positive");
    switch (s.kind) {
    case DatasetKind::two_moons:
        if (s.classes != 0 && s.classes != 2) throw ConfigError("two-moons has exactly 2 classes");
        s.classes = 2;
        // Padding with noise coordinates keeps few-label supervised training from
        // solving the task outright, so unlabeled data matters.
        if (s.dim == 0) s.dim = 20;
        if (s.noise < 0) s.noise = 0.1;
        break;
    case DatasetKind::gaussian_blobs:
        if (s.classes == 0) s.classes = 3;
        if (s.dim == 0) s.dim = 2;
        if (s.noise < 0) s.noise = 0.08;
        break;
    case DatasetKind::ring:
        if (s.classes == 0) s.classes = 2;
        if (s.dim == 0) s.dim = 2;
        if (s.noise < 0) s.noise = 0.05;
        break;
    case DatasetKind::raster_digits_lite:
        if (s.classes == 0) s.classes = 10;
        if (s.classes > 10) throw ConfigError("raster-digits-lite has at most 10 classes");
        if (s.dim != 0 && s.dim != 64) throw ConfigError("raster-digits-lite is 8x8 (dim 64)");
        s.dim = 64;
        if (s.noise < 0) s.noise = 0.15;
        break;
    }
    if (s.classes < 2) throw ConfigError("need at least 2 classes");
    if (s.dim < 2) throw ConfigError("dim must be at least 2");
    return s;
}

/// Deterministic in (spec, seed). Each split draws from its own derived stream.
inline DatasetBundle make_dataset(const DatasetSpec& requested, std::uint64_t seed) {
    const DatasetSpec spec = resolve(requested);
    detail::Generator gen{spec, spec.classes, spec.dim, spec.noise};
    DatasetBundle b;
    b.kind = to_string(spec.kind);
    b.dim = spec.dim;
    b.num_classes = spec.classes;
    b.seed = seed;
    b.labeled = gen.split(spec.labeled, mix_seed(seed, 1));
    b.unlabeled = gen.split(spec.unlabeled, mix_seed(seed, 2));
    b.test = gen.split(spec.test, mix_seed(seed, 3));
    b.poison.assign(b.unlabeled.size(), false);
    return b;
}

} // namespace sslpoison::data
