#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "coarsen/error.hpp"

namespace coarsen {

using cplx = std::complex<double>;

inline constexpr double euler_gamma = std::numbers::egamma;
inline constexpr double pi = std::numbers::pi;

/**
 * @brief Entire part of the exponential integral, chi(z) = sum_{k>=1} (-1)^{k+1} z^k / (k k!).
 *
 * E1(z) = -log z - gamma + chi(z). Used directly for |z| <= 4 and, on the
 * negative real axis, by lambda_decay.
 */
inline cplx ein_series(cplx z)
{
    cplx term = z;   // (-1)^{k+1} z^k / k!
    cplx sum = z;
    for (int k = 2; k < 200; ++k) {
        term *= -z / double(k);
        cplx add = term / double(k);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

/**
 * @brief Exponential integral E1(z) = int_1^inf e^{-zy}/y dy, principal branch.
 *
 * Power series for |z| <= 4, modified Lentz continued fraction beyond.
 * Throws DomainError at 0 and on the closed negative real axis.
 */
inline cplx e1(cplx z)
{
    if (z == cplx(0.0, 0.0)) throw DomainError("E1: logarithmic singularity at 0");
    if (z.imag() == 0.0 && z.real() < 0.0) throw DomainError("E1: argument on the branch cut");
    if (std::abs(z) <= 4.0) return -std::log(z) - euler_gamma + ein_series(z);

    // E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
    constexpr double tiny = 1e-300;
    cplx b = z + 1.0;
    cplx c = 1.0 / tiny;
    cplx d = 1.0 / b;
    cplx h = d;
    for (int i = 1; i < 100000; ++i) {
        double an = -double(i) * double(i);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        cplx del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) return h * std::exp(-z);
    }
    throw NumericalError("E1: continued fraction did not converge");
}

/// Fourier transform of w*(y) = 1/y on [1, inf): E1(i xi). Im(xi) <= 0 expected.
inline cplx w_star_hat(cplx xi)
{
    if (xi == cplx(0.0, 0.0)) throw DomainError("w_star_hat: xi = 0");
    return e1(cplx(0.0, 1.0) * xi);
}

inline cplx w_star_hat(double xi) { return w_star_hat(cplx(xi, 0.0)); }

/// x(xi) = int_xi^inf cos t / t dt for xi > 0.
inline double x_of_xi(double xi) { return w_star_hat(xi).real(); }

/// y(xi) = int_xi^inf sin t / t dt for xi > 0.
inline double y_of_xi(double xi) { return -w_star_hat(xi).imag(); }

/// K(xi) = x(xi) + log(2 cos y(xi)); positive for all xi > 0.
inline double K_of_xi(double xi)
{
    cplx w = w_star_hat(xi);
    return w.real() + std::log(2.0 * std::cos(-w.imag()));
}

struct MarginReport {
    double margin;      ///< min over the grid of 1 - |1 - exp(-theta w*^(xi))|
    double K_min;       ///< min over the grid of K(xi)
    double xi_at_margin;
};

/**
 * @brief Unit-disk margin of 1 - exp(-theta w*^) on a grid of positive frequencies.
 */
inline MarginReport appendix_a_margin(double theta, std::span<const double> xi_grid)
{
    detail::require(!xi_grid.empty(), "appendix_a_margin: empty grid");
    MarginReport r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0.0};
    for (double xi : xi_grid) {
        detail::require(xi > 0.0, "appendix_a_margin: grid must be positive");
        cplx w = w_star_hat(xi);
        double m = 1.0 - std::abs(1.0 - std::exp(-theta * w));
        if (m < r.margin) {
            r.margin = m;
            r.xi_at_margin = xi;
        }
        double K = w.real() + std::log(2.0 * std::cos(-w.imag()));
        r.K_min = std::min(r.K_min, K);
    }
    return r;
}

/// n points log-spaced on [a, b].
inline std::vector<double> log_grid(double a, double b, int n)
{
    std::vector<double> g(n);
    double la = std::log(a), lb = std::log(b);
    for (int i = 0; i < n; ++i) g[i] = std::exp(la + (lb - la) * i / double(n - 1));
    return g;
}

/// Gamma function on the real line (std::tgamma, correctly rounded to a few ulp on (0,1)).
inline double gamma_fn(double x) { return std::tgamma(x); }

} // namespace coarsen
