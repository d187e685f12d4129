#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "coarsen/error.hpp"
#include "coarsen/special.hpp"

namespace coarsen {

/** @brief Truncated power series sum_k c_k x^k with a nominal radius of convergence. */
struct PowerSeries {
    std::vector<double> coeffs;
    double radius = std::numeric_limits<double>::infinity();

    cplx operator()(cplx x) const
    {
        if (std::abs(x) >= radius) throw DomainError("PowerSeries: argument outside the radius");
        cplx s = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) s = s * x + *it;
        return s;
    }
};

namespace detail {

inline double gk_integrate(auto f, double a, double b)
{
    using boost::math::quadrature::gauss_kronrod;
    double err = 0.0;
    return gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-15, &err);
}

/// Horner evaluation of sum c_i z^i.
template <class T>
T horner(const std::vector<double>& c, T z)
{
    T s = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * z + *it;
    return s;
}

} // namespace detail

/**
 * @brief Merge polynomial Q(z) = sum_j p_j z^j and the analytic data derived from it.
 *
 * Constants are computed at construction; the object is immutable afterwards.
 */
class Kernel {
public:
    static constexpr double default_guard = 0.02;

    explicit Kernel(std::vector<double> weights, int series_order = 128)
    {
        detail::require(!weights.empty(), "kernel: empty weight list");
        detail::require(series_order >= 2, "kernel: series_order must be >= 2");
        double sum = 0.0;
        for (double p : weights) {
            detail::require(std::isfinite(p) && p >= 0.0, "kernel: weights must be nonnegative");
            sum += p;
        }
        detail::require(std::abs(sum - 1.0) <= 1e-12, "kernel: weights must sum to 1");
        while (weights.back() == 0.0) weights.pop_back();
        p_ = std::move(weights);
        N_ = int(p_.size());

        n_min_ = 1;
        while (p_[n_min_ - 1] == 0.0) ++n_min_;
        q_ = 0.0;
        for (int j = 1; j <= N_; ++j) q_ += j * p_[j - 1];

        build_quotients();
        kappa_ = std::exp(-detail::gk_integrate([&](double z) { return a3_over_a1(z); }, 0.0, 1.0));
        if (N_ == 1) {
            R_ = std::numeric_limits<double>::infinity();
        } else {
            double i02 = detail::gk_integrate([&](double z) { return a3_over_a1(z); }, 0.0, 2.0);
            // int_2^inf q/(1-Q(z)) dz with z = 2/t
            double tail = detail::gk_integrate([&](double t) {
                if (t == 0.0) return N_ == 2 ? -2.0 * q_ / (4.0 * p_[1]) : 0.0;
                // t^N (1 - Q(2/t)) = t^N - sum_j p_j 2^j t^{N-j}
                double den = std::pow(t, N_);
                for (int j = 1; j <= N_; ++j) den -= p_[j - 1] * std::pow(2.0, j) * std::pow(t, N_ - j);
                return 2.0 * q_ * std::pow(t, N_ - 2) / den;
            }, 0.0, 1.0);
            R_ = 1.0 + std::exp(-i02 - tail);
        }
        build_roots();
        build_psi(series_order);
        if (N_ > 1) lambda_ = solve_lambda();
        theta_star_ = compute_theta_star();
    }

    const std::vector<double>& weights() const { return p_; }
    int degree() const { return N_; }
    double q() const { return q_; }
    double kappa() const { return kappa_; }
    double radius_R() const { return R_; }
    int n_min() const { return n_min_; }
    /// +inf for Q(z) = z.
    double lambda_decay() const { return lambda_ ? *lambda_ : std::numeric_limits<double>::infinity(); }
    double theta_star() const { return theta_star_; }
    int series_order() const { return int(psi_.size()) - 1; }
    /// Psi_0 .. Psi_K (Psi_0 = 0).
    const std::vector<double>& psi_coeffs() const { return psi_; }
    bool closed_form_phi() const { return closed_form_; }

    template <class T>
    T Q(T z) const
    {
        T s = 0.0;
        for (int j = N_; j >= 1; --j) s = (s + p_[j - 1]) * z;
        return s;
    }

    template <class T>
    T dQ(T z) const
    {
        T s = 0.0;
        for (int j = N_; j >= 1; --j) s = s * z + double(j) * p_[j - 1];
        return s;
    }

    /// phi(z) = int_0^z dw / (1 - Q(w)) for |z| < 1.
    cplx phi(cplx z) const
    {
        if (std::abs(z) >= 1.0) throw DomainError("phi: |z| must be < 1");
        if (closed_form_) {
            cplx s = 0.0;
            for (std::size_t i = 0; i < roots_.size(); ++i) s += residues_[i] * std::log(1.0 - z / roots_[i]);
            if (z.imag() == 0.0) s.imag(0.0);
            return s;
        }
        return phi_quadrature(z);
    }

    double phi(double z) const { return phi(cplx(z, 0.0)).real(); }

    /// phi by Gauss-Kronrod along the segment [0, z]; independent of the closed form.
    cplx phi_quadrature(cplx z) const
    {
        if (std::abs(z) >= 1.0) throw DomainError("phi: |z| must be < 1");
        auto re = [&](double t) { return (z / (1.0 - Q(t * z))).real(); };
        auto im = [&](double t) { return (z / (1.0 - Q(t * z))).imag(); };
        return {detail::gk_integrate(re, 0.0, 1.0), detail::gk_integrate(im, 0.0, 1.0)};
    }

    /// Phi(z) = 1 - exp(-q phi(z)).
    cplx Phi(cplx z) const { return 1.0 - std::exp(-q_ * phi(z)); }
    double Phi(double z) const { return 1.0 - std::exp(-q_ * phi(z)); }

    /// Psi series to the requested order (coefficients Psi_0 .. Psi_K), radius R.
    PowerSeries psi_series(int order) const
    {
        detail::require(order >= 2, "psi_series: order must be >= 2");
        if (order <= series_order()) return {std::vector<double>(psi_.begin(), psi_.begin() + order + 1), R_};
        return Kernel(p_, order).psi_series(order);
    }

    /**
     * @brief Evaluate Psi(u) from the stored series.
     *
     * Requires |u| < R (1 - guard). Throws DomainError when the tail bound of the
     * truncated series exceeds tol.
     */
    cplx psi_eval(cplx u, double tol = 1e-12, double guard = default_guard) const
    {
        if (!std::isfinite(R_)) return u;
        cplx v = u / scale_;
        double av = std::abs(v);
        if (av >= 1.0 - guard) throw DomainError("psi_eval: |u| too close to the radius R");
        int K = int(scaled_.size()) - 1;
        double tail = std::abs(scaled_[K]) * std::pow(av, K + 1) / (1.0 - av);
        if (tail > tol) throw DomainError("psi_eval: series order too low for this |u|");
        return detail::horner(scaled_, v);
    }

    /**
     * @brief Psi(u) by Newton iteration on Phi(z) = u from a nearby root z0.
     *
     * Reaches the analytic continuation of Psi beyond its disk along a path of
     * nearby arguments. The root must stay inside the unit disk.
     */
    cplx psi_newton(cplx u, cplx z0, double tol = 1e-13) const
    {
        cplx z = z0;
        for (int it = 0; it < 60; ++it) {
            cplx P = Phi(z);
            cplx r = P - u;
            if (std::abs(r) <= tol * (1.0 + std::abs(u))) return z;
            cplx dP = q_ * (1.0 - P) / (1.0 - Q(z));
            cplx step = r / dP;
            // damp so that the iterate never leaves the unit disk
            double lam = 1.0;
            while (std::abs(z - lam * step) >= 1.0 && lam > 1e-6) lam *= 0.5;
            z -= lam * step;
        }
        throw DomainError("psi_newton: no root of Phi(z) = u inside the unit disk");
    }

    /// Largest |u| accepted by psi_eval at tolerance tol.
    double psi_reach(double tol = 1e-12, double guard = default_guard) const
    {
        if (!std::isfinite(R_)) return std::numeric_limits<double>::infinity();
        int K = int(scaled_.size()) - 1;
        double aK = std::max(std::abs(scaled_[K]), 1e-300);
        double lo = 0.0, hi = 1.0 - guard;
        for (int it = 0; it < 100; ++it) {
            double m = 0.5 * (lo + hi);
            (aK * std::pow(m, K + 1) / (1.0 - m) > tol ? hi : lo) = m;
        }
        return lo * scale_;
    }

private:
    std::vector<double> p_;
    int N_ = 1;
    int n_min_ = 1;
    double q_ = 1.0;
    double kappa_ = 1.0;
    double R_ = std::numeric_limits<double>::infinity();
    std::optional<double> lambda_;
    double theta_star_ = std::numeric_limits<double>::infinity();
    std::vector<double> A1_, A3_;  // (1-Q)/(1-z) and (q - A1)/(1-z)
    std::vector<cplx> roots_, residues_;
    bool closed_form_ = true;
    std::vector<double> psi_, scaled_;
    double scale_ = 1.0;

    void build_quotients()
    {
        A1_.assign(N_, 0.0);
        for (int i = 0; i < N_; ++i)
            for (int j = i + 1; j <= N_; ++j) A1_[i] += p_[j - 1];
        A3_.assign(std::max(N_ - 1, 1), 0.0);
        double acc = q_;
        for (int i = 0; i + 1 < N_; ++i) {
            acc -= A1_[i];
            A3_[i] = acc;
        }
        if (N_ == 1) A3_[0] = 0.0;
    }

    // 1/(1-z) - q/(1-Q(z)) = -A3(z)/A1(z); both polynomials have nonnegative coefficients.
    double a3_over_a1(double z) const { return detail::horner(A3_, z) / detail::horner(A1_, z); }

    void build_roots()
    {
        roots_ = {cplx(1.0, 0.0)};
        if (N_ > 1) {
            // roots of A1 via its companion matrix, polished by Newton on 1 - Q
            int m = N_ - 1;
            Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) C(0, i) = -A1_[m - 1 - i] / A1_[m];
            for (int i = 1; i < m; ++i) C(i, i - 1) = 1.0;
            Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
            for (int i = 0; i < m; ++i) {
                cplx r = es.eigenvalues()[i];
                for (int it = 0; it < 3; ++it) {
                    cplx d = dQ(r);
                    if (std::abs(d) == 0.0) break;
                    r -= (Q(r) - 1.0) / d;
                }
                roots_.push_back(r);
            }
        }
        double sep = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < roots_.size(); ++i)
            for (std::size_t j = i + 1; j < roots_.size(); ++j) sep = std::min(sep, std::abs(roots_[i] - roots_[j]));
        closed_form_ = sep > 1e-8;
        residues_.clear();
        for (auto r : roots_) residues_.push_back(-1.0 / dQ(r));
    }

    // q (m+1) a_{m+1} = s (delta_{m0} - sum_j p_j [A^j]_m + q m a_m), a_k = Psi_k s^k.
    void build_psi(int K)
    {
        scale_ = std::isfinite(R_) ? R_ : 1.0;
        const double s = scale_;
        scaled_.assign(K + 1, 0.0);
        // pw[j][m] = [A^{j+1}]_m
        std::vector<std::vector<double>> pw(N_, std::vector<double>(K + 1, 0.0));
        for (int m = 0; m < K; ++m) {
            pw[0][m] = scaled_[m];
            for (int j = 1; j < N_; ++j) {
                double acc = 0.0;
                for (int i = 1; i < m; ++i) acc += scaled_[i] * pw[j - 1][m - i];
                pw[j][m] = acc;
            }
            double rhs = (m == 0 ? 1.0 : 0.0) + q_ * m * scaled_[m];
            for (int j = 0; j < N_; ++j) rhs -= p_[j] * pw[j][m];
            scaled_[m + 1] = s * rhs / (q_ * (m + 1));
        }
        psi_.assign(K + 1, 0.0);
        for (int k = 1; k <= K; ++k) {
            psi_[k] = scaled_[k] * std::pow(s, -k);
            if (psi_[k] < -1e-14) throw NumericalError("psi_series: negative coefficient (absolute monotonicity violated)");
        }
    }

    // log lambda + gamma + Ein(lambda) = log(R - 1)
    double solve_lambda() const
    {
        double target = std::log(R_ - 1.0);
        // Ein(l) = sum l^k / (k k!) = -chi(-l)
        auto f = [&](double l) { return std::log(l) + euler_gamma - ein_series(cplx(-l, 0.0)).real() - target; };
        double lo = 1e-8, hi = 60.0;
        if (!(f(lo) < 0.0 && f(hi) > 0.0)) throw NumericalError("lambda_decay: no sign change on [1e-8, 60]");
        for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
            double m = 0.5 * (lo + hi);
            (f(m) < 0.0 ? lo : hi) = m;
        }
        return 0.5 * (lo + hi);
    }

    // Largest |c| over crossings of c(xi) = conj(E1(i xi)), xi > 0, with the ray of angle alpha.
    static double ray_reach(double alpha, int n)
    {
        auto g = log_grid(1e-4, 1e3, n);
        auto f = [&](double xi) {
            cplx c = std::conj(w_star_hat(xi));
            return (c * std::polar(1.0, -alpha)).imag();
        };
        double best = -1.0;
        double fprev = f(g[0]);
        for (int i = 1; i < n; ++i) {
            double fc = f(g[i]);
            if ((fprev < 0.0) != (fc < 0.0)) {
                boost::uintmax_t iters = 200;
                auto tol = [](double a, double b) { return std::abs(a - b) <= 1e-15 * std::abs(a); };
                auto br = boost::math::tools::toms748_solve(f, g[i - 1], g[i], fprev, fc, tol, iters);
                double xi = 0.5 * (br.first + br.second);
                cplx c = std::conj(w_star_hat(xi));
                if ((c * std::polar(1.0, -alpha)).real() > 0.0) best = std::max(best, std::abs(c));
            }
            fprev = fc;
        }
        return best;
    }

    // Smallest theta at which 1 - exp(-theta w*^(xi)) reaches the singular point R of Psi.
    double compute_theta_star() const
    {
        if (!std::isfinite(R_)) return std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 20; ++k) {
            cplx P(-std::log(R_ - 1.0), pi * (2 * k + 1));
            double alpha = std::arg(P);
            double r1 = ray_reach(alpha, 4096);
            if (r1 <= 0.0) continue;
            double r2 = ray_reach(alpha, 8192);
            if (std::abs(r1 - r2) > 1e-9 * r1) throw NumericalError("theta_star: crossing not stable under grid refinement");
            best = std::min(best, std::abs(P) / r2);
        }
        return best;
    }
};

} // namespace coarsen
