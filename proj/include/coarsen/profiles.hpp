#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "coarsen/error.hpp"
#include "coarsen/fft.hpp"
#include "coarsen/grid.hpp"
#include "coarsen/kernel.hpp"
#include "coarsen/special.hpp"
#include "coarsen/transform.hpp"

namespace coarsen {

/** @brief Grid for steady states: step h, range [1, y_max], spectral length padding*(M-1) or explicit. */
struct GridSpec {
    double h = 1.0 / 64.0;
    double y_max = 64.0;
    int padding = 4;
    std::size_t length = 0;  ///< transform length; 0 picks next_pow2(padding * (M - 1))

    std::size_t points() const { return std::size_t(std::llround((y_max - 1.0) / h)) + 1; }
    std::size_t transform_length() const
    {
        return length ? length : next_pow2(std::size_t(padding) * (points() - 1));
    }
};

inline constexpr double negative_ringing_tol = 1e-9;

/// Spectral steady state together with the raw diagnostics before clamping and renormalization.
struct SpectralProfile {
    GridDensity eta;
    double raw_mass = 0.0;
    double min_raw = 0.0;
    std::size_t clamped = 0;
    std::size_t transform_length = 0;
};

namespace detail {

inline std::vector<double> spectral_profile_values(const Kernel& k, double theta, const GridSpec& spec, double tol)
{
    std::size_t M = spec.points(), L = spec.transform_length();
    if (L < M) throw ConfigError("steady state: transform length below grid size");
    CubicTransform T(spec.h, L);
    SpectralFunction S{T.xi_step(), std::vector<cplx>(L)};
    const double R = k.radius_R();
    S.samples[0] = 1.0;
    for (std::size_t j = 1; j < L; ++j) {
        cplx u = 1.0 - std::exp(-theta * w_star_hat(T.xi(j)));
        if (std::abs(u) >= R * (1.0 - Kernel::default_guard))
            throw DomainError("steady state: 1 - exp(-theta w*) leaves the disk of Psi (theta too large)");
        S.samples[j] = k.psi_eval(u, tol);
    }
    auto v = T.inverse(S);
    v.resize(M);
    return v;
}

} // namespace detail

/**
 * @brief Self-similar profile for 0 < theta <= 1 from its Fourier transform Psi(1 - exp(-theta E1(i xi))).
 *
 * Negative ringing down to -1e-9 is clamped; anything below is a NumericalError.
 * The mass is renormalized to 1 if it drifted by less than 1e-4.
 */
inline SpectralProfile steady_state_spectral_report(const Kernel& k, double theta, const GridSpec& spec = {})
{
    detail::require(theta > 0.0 && theta <= 1.0, "steady_state_spectral: theta must lie in (0, 1]");
    auto v = detail::spectral_profile_values(k, theta, spec, 1e-12);
    SpectralProfile out;
    out.transform_length = spec.transform_length();
    out.min_raw = *std::min_element(v.begin(), v.end());
    for (double& x : v) {
        if (x < -negative_ringing_tol) throw NumericalError("steady state: negative value beyond ringing tolerance");
        if (x < 0.0) {
            x = 0.0;
            ++out.clamped;
        }
    }
    out.eta = GridDensity(spec.h, std::move(v));
    out.raw_mass = out.eta.mass();
    if (std::abs(out.raw_mass - 1.0) < 1e-4)
        for (double& x : out.eta.values) x /= out.raw_mass;
    return out;
}

inline GridDensity steady_state_spectral(const Kernel& k, double theta, const GridSpec& spec = {})
{
    return steady_state_spectral_report(k, theta, spec).eta;
}

/**
 * @brief Generalized profile for theta > 1 (diagnostic only, never a probability density).
 *
 * Raw inverse transform, no clamping or renormalization. Needs a kernel built
 * with a long Psi series when theta approaches theta_star.
 */
inline GridDensity generalized_profile_spectral(const Kernel& k, double theta, const GridSpec& spec = {})
{
    detail::require(theta > 0.0, "generalized profile: theta must be positive");
    return GridDensity(spec.h, detail::spectral_profile_values(k, theta, spec, 1e-10));
}

/**
 * @brief Q[eta] = sum_j p_j eta^{*j} on the grid of eta.
 *
 * Convolutions act on weight-multiplied samples, B_j = h B_1 * B_{j-1} with
 * B_1 = w eta, so that mass(Q[eta]) = Q(mass(eta)) holds to rounding.
 * Requires 1/h integer and y0 = 1. Throws GridOverflow if the mass falling
 * beyond the grid exceeds overflow_tol.
 */
inline GridDensity apply_Q(const Kernel& k, const GridDensity& eta, double overflow_tol = 1e-12)
{
    const std::size_t c = cells_per_unit(eta.h);
    detail::require(eta.y0 == 1.0, "apply_Q: grid must start at y = 1");
    const std::size_t M = eta.size(), s = eta.support_index();
    const double h = eta.h;
    GridDensity out(h, std::vector<double>(M, 0.0), k.n_min() * eta.y(s));
    if (s >= M) return out;

    std::vector<double> B1(M - s);
    for (std::size_t m = 0; m < B1.size(); ++m) B1[m] = start_weight(std::ptrdiff_t(m)) * eta.values[s + m];
    std::size_t last = B1.size();
    while (last > 0 && B1[last - 1] == 0.0) --last;
    B1.resize(std::max<std::size_t>(last, 1));

    const int N = k.degree(), n = k.n_min();
    const auto& p = k.weights();
    // first index of P_j: y = j y_s  ->  (j - 1) c + j s
    auto start = [&](int j) { return std::size_t(j - 1) * c + std::size_t(j) * s; };
    const std::size_t o = start(n);
    double lost = 0.0;
    std::vector<double> Bj = B1;
    for (int j = 1; j <= N; ++j) {
        if (j > 1) {
            Bj = convolve(B1, Bj, B1.size() + Bj.size() - 1);
            for (double& x : Bj) x *= h;
        }
        if (p[j - 1] == 0.0) continue;
        std::size_t sj = start(j);
        for (std::size_t m = 0; m < Bj.size(); ++m) {
            std::size_t i = sj + m;
            if (i >= M) {
                lost += p[j - 1] * h * Bj[m];
                continue;
            }
            out.values[i] += p[j - 1] * Bj[m] / start_weight(std::ptrdiff_t(i - o));
        }
    }
    if (std::abs(lost) > overflow_tol) throw GridOverflow("apply_Q: convolution support exceeds the grid");
    // FFT round-off below the support start would otherwise leak into later steps
    for (std::size_t i = 0; i < std::min(o, M); ++i) out.values[i] = 0.0;
    return out;
}

/// (T1 eta)(y) = eta(y - 1): exact shift by 1/h cells; support_min += 1.
inline GridDensity shift_T1(const GridDensity& eta, double overflow_tol = 1e-12)
{
    const std::size_t c = cells_per_unit(eta.h);
    GridDensity out(eta.h, std::vector<double>(eta.size(), 0.0), eta.support_min + 1.0, eta.y0);
    double lost = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (i + c < eta.size())
            out.values[i + c] = eta.values[i];
        else
            lost += eta.weight(i) * eta.values[i];
    }
    if (std::abs(lost) > overflow_tol) throw GridOverflow("shift_T1: shifted support exceeds the grid");
    return out;
}

/// lim y^{1+theta} eta*_theta(y) = theta e^{theta gamma} / (kappa Gamma(1 - theta)), 0 < theta < 1.
inline double tail_constant(const Kernel& k, double theta)
{
    if (!(theta > 0.0 && theta < 1.0)) throw DomainError("tail_constant: theta must lie in (0, 1)");
    return theta * std::exp(theta * euler_gamma) / (k.kappa() * gamma_fn(1.0 - theta));
}

namespace detail {

/// int_{y_i}^{y_{i+1}} F for cells of a uniform grid, cubic Lagrange with one-sided stencils at the ends.
inline std::vector<double> cell_integrals(const std::vector<double>& F, std::size_t a, std::size_t b, double h)
{
    std::vector<double> out(b - a, 0.0);
    std::size_t n = b - a + 1;
    for (std::size_t i = a; i < b; ++i) {
        if (n < 4) {
            out[i - a] = 0.5 * h * (F[i] + F[i + 1]);
        } else if (i == a) {
            out[i - a] = h * (9 * F[i] + 19 * F[i + 1] - 5 * F[i + 2] + F[i + 3]) / 24.0;
        } else if (i + 1 == b) {
            out[i - a] = h * (9 * F[i + 1] + 19 * F[i] - 5 * F[i - 1] + F[i - 2]) / 24.0;
        } else {
            out[i - a] = h * (-F[i - 1] + 13 * F[i] + 13 * F[i + 1] - F[i + 2]) / 24.0;
        }
    }
    return out;
}

inline std::vector<double> ode_march(const Kernel& k, double beta, double y_max, double hf)
{
    const std::size_t c = cells_per_unit(hf);
    const std::size_t M = std::size_t(std::llround((y_max - 1.0) / hf)) + 1;
    const std::size_t n = std::size_t(k.n_min());
    std::vector<double> f(M, 0.0);
    std::size_t a = std::min(n * c, M - 1);
    for (std::size_t i = 0; i <= a; ++i) f[i] = beta / (1.0 + double(i) * hf);
    while (a < M - 1) {
        std::size_t b = std::min(a + n * c, M - 1);
        GridDensity known(hf, std::vector<double>(f.begin(), f.begin() + std::ptrdiff_t(a + 1)));
        known.values.resize(b + 1, 0.0);
        auto Qe = apply_Q(k, known, std::numeric_limits<double>::infinity());
        // F(y) = Q[eta](y - 1) on [y_a, y_b]
        std::vector<double> F(b + 1, 0.0);
        for (std::size_t i = a; i <= b; ++i) F[i] = i >= c ? Qe.values[i - c] : 0.0;
        auto cells = cell_integrals(F, a, b, hf);
        double ye = (1.0 + double(a) * hf) * f[a];
        for (std::size_t i = a; i < b; ++i) {
            ye -= beta * cells[i - a];
            f[i + 1] = ye / (1.0 + double(i + 1) * hf);
        }
        a = b;
    }
    return f;
}

} // namespace detail

/**
 * @brief Steady state by marching the stationary equation (y eta)' = -beta T1 Q[eta] over the delay intervals.
 *
 * eta = beta/y on [1, n+1]; on each later interval of length n the right side
 * depends only on the already computed part, so (y eta) is advanced by a
 * fourth order cumulative quadrature on a grid four times finer than h.
 * A Richardson comparison with the doubled step controls the error (tol),
 * refining up to three times before a NumericalError.
 */
inline GridDensity steady_state_ode(const Kernel& k, double beta, double y_max, double h = 1.0 / 64.0, double tol = 1e-7)
{
    detail::require(beta > 0.0, "steady_state_ode: beta must be positive");
    detail::require(y_max > k.n_min() + 1.0, "steady_state_ode: y_max must exceed n + 1");
    cells_per_unit(h);
    const std::size_t M = std::size_t(std::llround((y_max - 1.0) / h)) + 1;
    for (int refine = 0, r = 4; refine <= 3; ++refine, r *= 2) {
        auto fine = detail::ode_march(k, beta, y_max, h / r);
        auto coarse = detail::ode_march(k, beta, y_max, 2.0 * h / r);
        double err = 0.0;
        for (std::size_t i = 0; i < coarse.size(); ++i) err = std::max(err, std::abs(fine[2 * i] - coarse[i]));
        if (err <= tol) {
            GridDensity out(h, std::vector<double>(M));
            for (std::size_t i = 0; i < M; ++i) out.values[i] = fine[i * std::size_t(r)];
            return out;
        }
    }
    throw NumericalError("steady_state_ode: step refinement did not reach tolerance");
}

struct LowerBoundReport {
    double min_slack = std::numeric_limits<double>::infinity();
    double y_at_min = 0.0;
};

/**
 * @brief Checks Q[eta](y) >= eta(y) Q'(int_1^{y/N} eta) for y >= N = deg Q on the grid.
 *
 * Precondition: eta nonnegative and non-increasing (to 1e-9).
 */
inline LowerBoundReport check_lower_bound_B(const Kernel& k, const GridDensity& eta)
{
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (eta.values[i] < -1e-9) throw ConfigError("check_lower_bound_B: eta must be nonnegative");
        if (i > 0 && eta.y(i - 1) >= eta.support_min && eta.values[i] > eta.values[i - 1] + 1e-9)
            throw ConfigError("check_lower_bound_B: eta must be non-increasing");
    }
    auto Qe = apply_Q(k, eta, std::numeric_limits<double>::infinity());
    // cumulative trapezoid of eta
    std::vector<double> cum(eta.size(), 0.0);
    for (std::size_t i = 1; i < eta.size(); ++i) cum[i] = cum[i - 1] + 0.5 * eta.h * (eta.values[i - 1] + eta.values[i]);
    auto cum_at = [&](double y) {
        double r = (y - eta.y0) / eta.h;
        auto i = std::min<std::size_t>(std::size_t(r), eta.size() - 2);
        double t = r - double(i);
        double vi = eta.values[i], vj = eta.values[i + 1];
        return cum[i] + eta.h * (t * vi + 0.5 * t * t * (vj - vi));
    };
    const double N = k.degree();
    LowerBoundReport r;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        double y = eta.y(i);
        if (y < N - 1e-12) continue;
        double rhs = eta.values[i] * k.dQ(cum_at(y / N));
        double slack = Qe.values[i] - rhs;
        if (slack < r.min_slack) {
            r.min_slack = slack;
            r.y_at_min = y;
        }
    }
    return r;
}

/**
 * @brief min over p in the grid and k <= kmax of (-1)^k Delta_delta^k L(p), L the Laplace transform of eta.
 *
 * Nonnegative for completely monotone L.
 */
inline double laplace_cm_margin(const GridDensity& eta, double p_lo, double p_hi, double delta, int kmax)
{
    auto lap = [&](double p) {
        double s = 0.0;
        for (std::size_t i = eta.support_index(); i < eta.size(); ++i) s += eta.weight(i) * std::exp(-p * eta.y(i)) * eta.values[i];
        return s;
    };
    double worst = std::numeric_limits<double>::infinity();
    int np = int(std::floor((p_hi - p_lo) / delta + 1e-9)) + 1;
    std::vector<double> Lv(np + kmax);
    for (int i = 0; i < np + kmax; ++i) Lv[i] = lap(p_lo + i * delta);
    for (int i = 0; i < np; ++i) {
        std::vector<double> d(Lv.begin() + i, Lv.begin() + i + kmax + 1);
        for (int kk = 1; kk <= kmax; ++kk) {
            for (int m = 0; m + kk <= kmax; ++m) d[m] = d[m + 1] - d[m];
            worst = std::min(worst, (kk % 2 ? -1.0 : 1.0) * d[0]);
        }
    }
    return worst;
}

} // namespace coarsen
