#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "coarsen/error.hpp"
#include "coarsen/grid.hpp"
#include "coarsen/kernel.hpp"
#include "coarsen/profiles.hpp"
#include "coarsen/special.hpp"
#include "coarsen/transform.hpp"

namespace coarsen {

/// Weighted norm ||w||_{p,gamma} = ||y^gamma w||_{L^p}.
struct WeightedNormSpec {
    int p = 2;
    double gamma = 0.0;
};

/// Trapezoid evaluation of (int (y^gamma |f|)^p dy)^{1/p} over the stored grid.
inline double weighted_norm(const GridDensity& f, WeightedNormSpec spec)
{
    detail::require(spec.p == 1 || spec.p == 2, "weighted_norm: p must be 1 or 2");
    double s = 0.0;
    const std::size_t M = f.size();
    for (std::size_t i = 0; i < M; ++i) {
        double v = std::pow(f.y(i), spec.gamma) * std::abs(f.values[i]);
        double t = spec.p == 1 ? v : v * v;
        s += (i == 0 || i + 1 == M ? 0.5 : 1.0) * t;
    }
    s *= f.h;
    return spec.p == 1 ? s : std::sqrt(s);
}

/**
 * @brief (S_tau f)(y) = e^tau f(e^tau y) for y >= 1, zero where e^tau y leaves the grid.
 */
inline GridDensity semigroup_apply(const GridDensity& f, double tau, Interp mode = Interp::cubic)
{
    detail::require(tau >= 0.0, "semigroup_apply: tau must be nonnegative");
    if (tau == 0.0) return f;
    const double e = std::exp(tau);
    GridDensity out(f.h, std::vector<double>(f.size(), 0.0), std::max(f.y0, f.support_min / e), f.y0);
    for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = e * interpolate(f, e * out.y(i), mode);
    return out;
}

/// N(eta) = (theta/q) w* + d.
struct CounterTermDecomposition {
    double theta = 1.0;
    double theta_over_q = 0.5;
    GridDensity d;           ///< on the full transform period
    double d0 = 0.0;         ///< int d = d^(0)
    double y_max = 0.0;      ///< range of the density grid
    SpectralFunction d_hat;
};

/**
 * @brief Global linearization N = F^{-1} o phi o F and its inverse on a fixed grid.
 *
 * Holds the transform of length L and the samples E1(i xi_k) for a grid
 * [1, y_max] with step h. Densities are read on [1, y_max]; counter terms d
 * live on the whole period [1, 1 + L h).
 */
class Linearizer {
public:
    Linearizer(const Kernel& k, GridSpec spec = {})
        : k_(k), spec_(spec), T_(spec.h, spec.transform_length()), E_(T_.length())
    {
        cells_per_unit(spec.h);
        for (std::size_t j = 1; j < E_.size(); ++j) E_[j] = w_star_hat(T_.xi(j));
    }

    const Kernel& kernel() const { return k_; }
    const GridSpec& spec() const { return spec_; }
    const CubicTransform& transform() const { return T_; }
    std::size_t points() const { return spec_.points(); }
    std::size_t period_points() const { return T_.length(); }
    const std::vector<cplx>& w_star_samples() const { return E_; }

    SpectralFunction spectrum(const GridDensity& eta) const { return T_.forward(eta); }

    /// First moment and mass of eta, then the decomposition of its spectrum.
    CounterTermDecomposition forward(const GridDensity& eta, double theta) const
    {
        double m = eta.mass();
        if (std::abs(m - 1.0) > 1e-4) throw ConfigError("forward_transform: eta must have mass 1 on the grid");
        std::optional<double> mu;
        if (theta == 1.0) mu = eta.moment(1.0) / m;
        return forward_spectrum(spectrum(eta), theta, mu);
    }

    /**
     * @brief d^ = phi(eta^) - (theta/q) E1(i xi) for xi != 0.
     *
     * The slot xi = 0 takes the limit (1/q)(gamma - log(kappa mu)) when theta = 1,
     * and a quadratic extrapolation from the first three slots when theta < 1.
     */
    CounterTermDecomposition forward_spectrum(SpectralFunction eta_hat, double theta, std::optional<double> mu = {}) const
    {
        detail::require(theta > 0.0 && theta <= 1.0, "forward_transform: theta must lie in (0, 1]");
        const double q = k_.q();
        const std::size_t L = T_.length();
        if (eta_hat.size() != L) throw ConfigError("forward_transform: spectrum length mismatch");
        cplx m0 = eta_hat.samples[0];
        if (std::abs(m0 - 1.0) <= 1e-6)
            for (auto& s : eta_hat.samples) s /= m0;
        CounterTermDecomposition dec;
        dec.theta = theta;
        dec.theta_over_q = theta / q;
        dec.y_max = spec_.y_max;
        dec.d_hat = SpectralFunction{T_.xi_step(), std::vector<cplx>(L)};
        for (std::size_t j = 1; j < L; ++j) {
            cplx z = eta_hat.samples[j];
            if (std::abs(z) >= 1.0) throw DomainError("forward_transform: |eta^(xi)| >= 1 at a nonzero frequency");
            dec.d_hat.samples[j] = k_.phi(z) - dec.theta_over_q * E_[j];
        }
        if (theta == 1.0) {
            if (!mu) throw ConfigError("forward_transform: theta = 1 needs the first moment");
            dec.d_hat.samples[0] = (euler_gamma - std::log(k_.kappa() * *mu)) / q;
        } else {
            const auto& d = dec.d_hat.samples;
            dec.d_hat.samples[0] = (3.0 * d[1] - 3.0 * d[2] + d[3]).real();
        }
        dec.d0 = dec.d_hat.samples[0].real();
        dec.d = GridDensity(spec_.h, T_.inverse(dec.d_hat));
        return dec;
    }

    /**
     * @brief eta^ = Psi(1 - exp(-theta w*^ - q d^)), eta^(0) = 1.
     *
     * Arguments inside the reach of the Psi series use the series. With
     * continuation on, larger ones are solved from Phi(z) = u starting at the
     * neighbouring sample, sweeping outwards from xi = 0 on both half-lines.
     * Without it they raise the radius error.
     */
    SpectralFunction inverse_spectrum(const SpectralFunction& d_hat, double theta) const
    {
        const std::size_t L = T_.length();
        const double q = k_.q();
        const double reach = k_.psi_reach(1e-12);
        SpectralFunction out{T_.xi_step(), std::vector<cplx>(L)};
        out.samples[0] = 1.0;
        auto solve = [&](std::size_t j, std::size_t prev) {
            cplx u = 1.0 - std::exp(-theta * E_[j] - q * d_hat.samples[j]);
            if (std::abs(u) < reach) {
                out.samples[j] = k_.psi_eval(u, 1e-12);
            } else if (continuation_) {
                out.samples[j] = k_.psi_newton(u, out.samples[prev]);
            } else {
                throw DomainError("inverse_transform: argument leaves the disk of Psi (d too large)");
            }
        };
        for (std::size_t j = 1; j <= L / 2; ++j) solve(j, j - 1);
        for (std::size_t j = L - 1; j > L / 2; --j) solve(j, j + 1 == L ? 0 : j + 1);
        return out;
    }

    /// Allow Newton continuation of Psi outside its disk of convergence (on by default).
    void set_continuation(bool on) { continuation_ = on; }
    bool continuation() const { return continuation_; }

    GridDensity inverse(const CounterTermDecomposition& dec) const
    {
        auto d_hat = dec.d.size() == T_.length() && dec.d_hat.size() == T_.length() ? dec.d_hat : T_.forward(dec.d);
        return density(inverse_spectrum(d_hat, dec.theta));
    }

    /// Density on [1, y_max] from a spectrum.
    GridDensity density(const SpectralFunction& S) const
    {
        auto v = T_.inverse(S);
        v.resize(points());
        return GridDensity(spec_.h, std::move(v));
    }

    /// Shift the counter term by the semigroup: the w* part is invariant.
    CounterTermDecomposition shifted(const CounterTermDecomposition& dec, double tau, Interp mode = Interp::cubic) const
    {
        CounterTermDecomposition out = dec;
        out.d = semigroup_apply(dec.d, tau, mode);
        out.d_hat = T_.forward(out.d);
        out.d0 = out.d_hat.samples[0].real();
        return out;
    }

    /// N^{-1}((theta/q) w* + S_tau d) with d from eta0.
    GridDensity evolve(const GridDensity& eta0, double tau, double theta) const
    {
        if (tau == 0.0) return eta0;
        return inverse(shifted(forward(eta0, theta), tau));
    }

    /// eta*_theta on this grid (d = 0).
    GridDensity steady(double theta) const
    {
        SpectralFunction zero{T_.xi_step(), std::vector<cplx>(T_.length(), 0.0)};
        return density(inverse_spectrum(zero, theta));
    }

    /// ||eta - eta*_theta||_{2,gamma} / ||d||_{2,gamma} for the inverse of dec.
    double lipschitz_ratio(const CounterTermDecomposition& dec, double gamma) const
    {
        auto eta = inverse(dec);
        auto ref = steady(dec.theta);
        for (std::size_t i = 0; i < eta.size(); ++i) eta.values[i] -= ref.values[i];
        GridDensity d = dec.d;
        d.values.resize(points());
        double nd = weighted_norm(d, {2, gamma});
        return nd > 0.0 ? weighted_norm(eta, {2, gamma}) / nd : 0.0;
    }

private:
    Kernel k_;
    GridSpec spec_;
    CubicTransform T_;
    std::vector<cplx> E_;
    bool continuation_ = true;
};

/// Grid spec matching a density: same h and y_max, default padding.
inline GridSpec grid_of(const GridDensity& eta, int padding = 4)
{
    detail::require(eta.y0 == 1.0, "grid must start at y = 1");
    return GridSpec{eta.h, eta.y_max(), padding, 0};
}

inline CounterTermDecomposition forward_transform(const Kernel& k, const GridDensity& eta, double theta_hint = 1.0)
{
    return Linearizer(k, grid_of(eta)).forward(eta, theta_hint);
}

inline GridDensity inverse_transform(const Kernel& k, const CounterTermDecomposition& dec)
{
    return Linearizer(k, GridSpec{dec.d.h, dec.y_max, 4, dec.d.size()}).inverse(dec);
}

inline GridDensity evolve_exact(const Kernel& k, const GridDensity& eta0, double tau, double theta_hint = 1.0)
{
    return Linearizer(k, grid_of(eta0)).evolve(eta0, tau, theta_hint);
}

} // namespace coarsen
