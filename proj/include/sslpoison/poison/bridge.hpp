#pragma once

// Interpolation bridges from a source example x' (believed to be class y*) to
// a target x*, and the zero-knowledge variant with extra support paths that
// lead into x'.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/errors.hpp"
#include "sslpoison/poison/density.hpp"

namespace sslpoison::poison {

using data::Vector;

/// A path between two feature vectors: path(a, b, 0) == a and path(a, b, 1) == b.
using InterpolationPath = std::function<Vector(const Vector&, const Vector&, double)>;

/// x' (1 - alpha) + x* alpha. Exact at both endpoints.
inline Vector interp(const Vector& source, const Vector& target, double alpha) {
    if (source.size() != target.size()) throw ShapeError("interpolation endpoints differ in dimension");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("alpha must lie in [0,1]");
    if (alpha == 0.0) return source;
    if (alpha == 1.0) return target;
    return source * (1.0 - alpha) + target * alpha;
}

inline InterpolationPath linear_path() {
    return [](const Vector& a, const Vector& b, double t) { return interp(a, b, t); };
}

enum class NoiseKind { gaussian, uniform };

/// Poison budget may not exceed this fraction of the unlabeled pool without an override.
inline constexpr double kMaxPoisonFraction = 0.01;

struct PoisonSpec {
    Vector source;
    Vector target;
    int desired_label = 0;
    /// Ground truth of the target when known; must differ from desired_label.
    std::optional<int> target_label;
    int budget = 2;
    DensityFn density = normalize_density(DensityFn("1.5-x", [](double x) { return 1.5 - x; }));
    InterpolationPath path = linear_path();
    double noise_sigma = 0.0;
    NoiseKind noise_kind = NoiseKind::gaussian;
    std::uint64_t noise_seed = 0;
    /// Zero-knowledge support sources, each joined to `source` by its own path.
    std::vector<Vector> support;
    /// Size of the clean unlabeled pool the poison will join; 0 skips the budget check.
    int unlabeled_size = 0;
    bool allow_over_budget = false;
};

struct PoisonSet {
    std::vector<data::Example> points;  // unlabeled
    std::vector<double> alphas;         // coefficient of each point along its path
    std::vector<int> path;              // 0 = main bridge, i > 0 = support path i
};

namespace detail {

inline void validate(const PoisonSpec& spec) {
    if (spec.source.size() == 0 || spec.source.size() != spec.target.size())
        throw ShapeError("source and target must be nonempty and equally sized");
    if (spec.budget < 2) throw ContractError("budget must be at least 2");
    if (spec.target_label && *spec.target_label == spec.desired_label)
        throw ContractError("desired label equals the target's true label");
    if (spec.noise_sigma < 0.0) throw ContractError("noise scale must be nonnegative");
    if (!spec.allow_over_budget && spec.unlabeled_size > 0 &&
        !(spec.budget < kMaxPoisonFraction * spec.unlabeled_size))
        throw ConfigError("budget " + std::to_string(spec.budget) + " is not below 1% of the unlabeled pool (" +
                          std::to_string(spec.unlabeled_size) + ")");
    for (const auto& s : spec.support)
        if (s.size() != spec.source.size()) throw ShapeError("support source has the wrong dimension");
}

inline void append_path(PoisonSet& out, const PoisonSpec& spec, const Vector& from, const Vector& to, int count,
                        int path_id, std::mt19937_64& rng) {
    const auto alphas = sample_alphas(spec.density, count);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double a : alphas) {
        Vector x = spec.path(from, to, a);
        if (x.size() != from.size()) throw ShapeError("interpolation path changed the dimension");
        if (spec.noise_sigma > 0.0)
            for (Eigen::Index k = 0; k < x.size(); ++k)
                x(k) += spec.noise_sigma * (spec.noise_kind == NoiseKind::gaussian ? gauss(rng) : unif(rng));
        out.points.push_back(data::Example{data::clip_to_box(std::move(x)), std::nullopt});
        out.alphas.push_back(a);
        out.path.push_back(path_id);
    }
}

inline void check_path_endpoints(const PoisonSpec& spec) {
    const Vector a = spec.path(spec.source, spec.target, 0.0);
    const Vector b = spec.path(spec.source, spec.target, 1.0);
    if ((a - spec.source).norm() > 1e-12 || (b - spec.target).norm() > 1e-12)
        throw ContractError("interpolation path does not meet its endpoints");
}

} // namespace detail

/// N points interp(x', x*, alpha_i) at the density's quantiles, optionally noised, clipped to the box.
inline PoisonSet build_bridge(const PoisonSpec& spec) {
    detail::validate(spec);
    detail::check_path_endpoints(spec);
    PoisonSet out;
    std::mt19937_64 rng(spec.noise_seed);
    detail::append_path(out, spec, spec.source, spec.target, spec.budget, 0, rng);
    return out;
}

/// Main bridge x' -> x* plus one path from every support source into x'. The budget is
/// split evenly across paths; the main bridge takes any remainder.
inline PoisonSet build_zero_knowledge(const PoisonSpec& spec) {
    if (spec.support.empty()) return build_bridge(spec);
    detail::validate(spec);
    detail::check_path_endpoints(spec);
    const int paths = 1 + static_cast<int>(spec.support.size());
    const int each = spec.budget / paths;
    if (each < 2)
        throw ConfigError("budget " + std::to_string(spec.budget) + " cannot give each of " + std::to_string(paths) +
                          " paths at least 2 points");
    PoisonSet out;
    std::mt19937_64 rng(spec.noise_seed);
    detail::append_path(out, spec, spec.source, spec.target, each + spec.budget % paths, 0, rng);
    for (std::size_t i = 0; i < spec.support.size(); ++i)
        detail::append_path(out, spec, spec.support[i], spec.source, each, static_cast<int>(i) + 1, rng);
    return out;
}

/// Euclidean distance from p to the segment [a, b].
inline double distance_to_segment(const Vector& p, const Vector& a, const Vector& b) {
    const Vector ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - a - t * ab).norm();
}

} // namespace sslpoison::poison
