#pragma once

// Density functions on [0,1] controlling where bridge points are placed, their
// unit-integral normalization, and deterministic quantile sampling of the
// interpolation coefficients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "sslpoison/errors.hpp"

namespace sslpoison::poison {

/// Grid resolution for normalization and inversion.
inline constexpr int kDensityGridPoints = 10001;

class DensityFn {
public:
    DensityFn(std::string name, std::function<double(double)> rho) : name_(std::move(name)), rho_(std::move(rho)) {}

    const std::string& name() const { return name_; }
    double raw(double x) const { return rho_(x); }

    bool normalized() const { return static_cast<bool>(table_); }

    /// rho(x) divided by its integral over [0,1]; requires normalize_density.
    double operator()(double x) const {
        require_normalized();
        return rho_(x) / table_->integral;
    }

    /// Integral of the raw density over [0,1] (trapezoidal, on the grid).
    double integral() const {
        require_normalized();
        return table_->integral;
    }

    /// Cumulative integral of the normalized density from 0 to x.
    double cdf(double x) const {
        require_normalized();
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        const double h = 1.0 / (kDensityGridPoints - 1);
        const auto k = std::min(static_cast<std::size_t>(x / h), table_->cdf.size() - 2);
        const double s = x - static_cast<double>(k) * h;
        const double r0 = table_->density[k];
        const double r1 = table_->density[k + 1];
        return table_->cdf[k] + r0 * s + (r1 - r0) * s * s / (2.0 * h);
    }

    /// Smallest x with cdf(x) = q, treating the density as piecewise linear on the grid.
    double quantile(double q) const {
        require_normalized();
        if (q <= 0.0) return 0.0;
        if (q >= 1.0) return 1.0;
        const auto& F = table_->cdf;
        auto it = std::upper_bound(F.begin(), F.end(), q);
        std::size_t k = static_cast<std::size_t>(std::distance(F.begin(), it));
        k = std::clamp<std::size_t>(k, 1, F.size() - 1) - 1;
        const double h = 1.0 / (kDensityGridPoints - 1);
        const double r0 = table_->density[k];
        const double r1 = table_->density[k + 1];
        const double need = q - F[k];
        // Solve r0 s + (r1 - r0) s^2 / (2h) = need for s in [0, h].
        const double a = (r1 - r0) / (2.0 * h);
        double s;
        if (std::abs(a) < 1e-300) {
            s = r0 > 0.0 ? need / r0 : 0.0;
        } else {
            const double disc = std::max(0.0, r0 * r0 + 4.0 * a * need);
            // Numerically stable root of a s^2 + r0 s - need = 0.
            s = 2.0 * need / (r0 + std::sqrt(disc));
        }
        return std::clamp(static_cast<double>(k) * h + std::clamp(s, 0.0, h), 0.0, 1.0);
    }

private:
    friend DensityFn normalize_density(const DensityFn&);

    struct Table {
        double integral = 0.0;
        std::vector<double> density;  // normalized values on the grid
        std::vector<double> cdf;
    };

    void require_normalized() const {
        if (!table_) throw ContractError("density '" + name_ + "' has not been normalized");
    }

    std::string name_;
    std::function<double(double)> rho_;
    std::shared_ptr<const Table> table_;
};

/// Tabulates rho on a 10,001-point grid and rescales it to unit integral.
/// Samples must be finite and nonnegative, and strictly positive away from the endpoints.
inline DensityFn normalize_density(const DensityFn& rho) {
    const int n = kDensityGridPoints;
    const double h = 1.0 / (n - 1);
    auto table = std::make_shared<DensityFn::Table>();
    table->density.resize(n);
    for (int i = 0; i < n; ++i) {
        const double x = i == n - 1 ? 1.0 : i * h;
        const double v = rho.raw(x);
        const bool interior = i > 0 && i < n - 1;
        if (!std::isfinite(v) || v < 0.0 || (interior && v == 0.0))
            throw ContractError("density '" + rho.name() + "' is not positive at x=" + std::to_string(x));
        table->density[static_cast<std::size_t>(i)] = v;
    }
    double integral = 0.0;
    for (int i = 0; i + 1 < n; ++i)
        integral += 0.5 * h * (table->density[static_cast<std::size_t>(i)] + table->density[static_cast<std::size_t>(i) + 1]);
    if (!(integral > 0.0)) throw ContractError("density '" + rho.name() + "' has zero integral");
    table->integral = integral;
    for (auto& v : table->density) v /= integral;
    table->cdf.resize(n);
    table->cdf[0] = 0.0;
    for (int i = 1; i < n; ++i)
        table->cdf[static_cast<std::size_t>(i)] =
            table->cdf[static_cast<std::size_t>(i) - 1] +
            0.5 * h * (table->density[static_cast<std::size_t>(i) - 1] + table->density[static_cast<std::size_t>(i)]);
    // Absorb the accumulated rounding so that cdf(1) == 1 exactly.
    const double last = table->cdf.back();
    for (auto& v : table->cdf) v /= last;
    DensityFn out = rho;
    out.table_ = std::move(table);
    return out;
}

/// alpha_i = F^{-1}(i / (N-1)), i = 0..N-1. Endpoints are exactly 0 and 1.
inline std::vector<double> sample_alphas(const DensityFn& density, int count) {
    if (count < 2) throw ContractError("need at least 2 interpolation points");
    if (!density.normalized()) throw ContractError("density must be normalized");
    std::vector<double> alphas(static_cast<std::size_t>(count));
    alphas.front() = 0.0;
    alphas.back() = 1.0;
    for (int i = 1; i + 1 < count; ++i)
        alphas[static_cast<std::size_t>(i)] = density.quantile(static_cast<double>(i) / (count - 1));
    return alphas;
}

inline double standard_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// The eleven densities studied for bridge placement, weakest to strongest.
inline std::vector<DensityFn> registered_densities() {
    return {
        DensityFn("(1-x)^2", [](double x) { return (1 - x) * (1 - x); }),
        DensityFn("phi(x+.5)", [](double x) { return standard_normal_pdf(x + 0.5); }),
        DensityFn("phi(x+.3)", [](double x) { return standard_normal_pdf(x + 0.3); }),
        DensityFn("x", [](double x) { return x; }),
        DensityFn("x^4+(1-x)^4", [](double x) { return std::pow(x, 4) + std::pow(1 - x, 4); }),
        DensityFn("sqrt(1-x)", [](double x) { return std::sqrt(std::max(0.0, 1 - x)); }),
        DensityFn("x^2+(1-x)^2", [](double x) { return x * x + (1 - x) * (1 - x); }),
        DensityFn("1", [](double) { return 1.0; }),
        DensityFn("(1-x)^2+.5", [](double x) { return (1 - x) * (1 - x) + 0.5; }),
        DensityFn("1-x", [](double x) { return 1 - x; }),
        DensityFn("1.5-x", [](double x) { return 1.5 - x; }),
    };
}

inline DensityFn density_by_name(const std::string& name) {
    for (auto& d : registered_densities())
        if (d.name() == name) return normalize_density(d);
    throw ConfigError("unknown density '" + name + "'");
}

} // namespace sslpoison::poison
