#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>


#include "coarsen/error.hpp"
#include "coarsen/grid.hpp"
#include "coarsen/kernel.hpp"
#include "coarsen/linearize.hpp"
#include "coarsen/profiles.hpp"

namespace coarsen {

/// Result of integrate: per-step scalars and thinned snapshots.
struct EvolutionTrace {
    std::vector<double> taus;
    std::vector<double> beta_values;  ///< eta(tau, 1) at each recorded time
    std::vector<double> masses;
    std::vector<double> min_values;
    std::vector<double> outflows;     ///< int beta over each step, outflows[n] for [taus[n], taus[n+1]]
    std::vector<WeightedNormSpec> norm_specs;
    std::vector<std::vector<double>> norms;  ///< norms[n][s] for norm_specs[s]
    std::vector<double> snapshot_taus;
    std::vector<GridDensity> snapshots;
};

struct IntegrateOptions {
    double dtau = std::log(2.0) / 32.0;
    int snapshot_stride = 1;
    Interp interp = Interp::pchip;
    std::vector<WeightedNormSpec> norms;
    std::optional<GridDensity> reference;  ///< norms measure eta - reference when set
    double overflow_tol = 1e-4;  ///< mass of a source shape allowed to fall beyond y_max
    double mass_tol = 1e-3;
    double negativity_tol = 1e-6;
};

namespace detail {

/// int_a^b of the interpolant of g, three-point Gauss per grid cell (exact for cubic pieces).
inline double integrate_interp(const GridDensity& g, double a, double b, Interp mode)
{
    a = std::max(a, g.support_min);
    b = std::min(b, g.y_max());
    if (b <= a) return 0.0;
    static constexpr double x[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr double w[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    double s = 0.0;
    double lo = a;
    while (lo < b) {
        double next = g.y0 + (std::floor((lo - g.y0) / g.h + 1e-12) + 1.0) * g.h;
        double hi = std::min(next, b);
        double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
        for (int k = 0; k < 3; ++k) s += r * w[k] * interpolate(g, c + r * x[k], mode);
        lo = hi;
    }
    return s;
}

/// out += e^tau g(e^tau y) on the nodes of out.
inline void add_transported(std::vector<double>& out, double h, const GridDensity& g, double tau, Interp mode)
{
    const double e = std::exp(tau);
    const double first = g.support_min / e;
    for (std::size_t i = 0; i < out.size(); ++i) {
        double y = 1.0 + double(i) * h;
        if (y < first - 1e-12 * h) continue;
        double z = e * y;
        if (z > g.y_max()) break;
        out[i] += e * interpolate(g, z, mode);
    }
}

/// Source shape T1 Q[eta] on the grid of eta.
inline GridDensity source_shape(const Kernel& k, const GridDensity& eta, double overflow_tol)
{
    GridDensity g = eta;
    for (double& v : g.values) v = std::max(v, 0.0);
    return shift_T1(apply_Q(k, g, overflow_tol), overflow_tol);
}

} // namespace detail

/**
 * @brief Direct integrator for d_tau eta = d_y(y eta) + beta(tau) T1 Q[eta].
 *
 * Works on the integral form: eta(tau) is kept as S_tau eta0 plus source pieces
 * born at step midpoints, each transported from its birth data by a single
 * interpolation, so transport adds no cumulative diffusion.
 *
 * The source of step n has the shape T1 Q at the midpoint (predicted by half a
 * step) and carries the mass that left through y = 1 during the step. For the
 * initial piece that outflow is int_1^{e^dtau} of its interpolant, i.e. the
 * integral of the trace beta(s) = e^{s - tau_n} eta(tau_n, e^{s - tau_n});
 * for source pieces it is the drop of their grid mass. Total grid mass then
 * changes only through the quadrature error of the initial piece.
 *
 * Recorded masses count the initial piece exactly (its grid mass minus the
 * outflow) and source pieces by grid quadrature.
 */
inline EvolutionTrace integrate(const Kernel& k, const GridDensity& eta0, double tau_end, const IntegrateOptions& opt)
{
    detail::require(eta0.y0 == 1.0, "integrate: grid must start at y = 1");
    detail::require(opt.dtau > 0.0 && opt.dtau <= std::log(2.0) / 8.0 + 1e-15, "integrate: dtau must lie in (0, log 2 / 8]");
    detail::require(tau_end >= 0.0, "integrate: tau_end must be nonnegative");
    detail::require(opt.snapshot_stride >= 1, "integrate: snapshot stride must be >= 1");
    cells_per_unit(eta0.h);
    if (std::abs(eta0.mass() - 1.0) > opt.mass_tol) throw ConfigError("integrate: eta0 must have mass 1");
    if (eta0.min_value() < -opt.negativity_tol) throw ConfigError("integrate: eta0 must be nonnegative");
    if (opt.reference && opt.reference->size() != eta0.size()) throw ConfigError("integrate: reference grid mismatch");

    const double h = eta0.h;
    const std::size_t M = eta0.size();
    struct Piece {
        GridDensity g;
        double born;
        double mass;  ///< grid mass at the last step
    };
    std::vector<Piece> pieces{{eta0, 0.0, eta0.mass()}};

    auto sampled = [&](const GridDensity& g, double dt) {
        std::vector<double> v(M, 0.0);
        detail::add_transported(v, h, g, dt, opt.interp);
        return GridDensity(h, std::move(v));
    };
    auto interp_outflow = [&](const Piece& p, double tau, double dt) {
        double a = std::exp(tau - p.born);
        return detail::integrate_interp(p.g, a, a * std::exp(dt), opt.interp);
    };

    EvolutionTrace tr;
    tr.norm_specs = opt.norms;
    auto record = [&](double tau, const GridDensity& eta, double m, std::size_t step, bool last) {
        tr.taus.push_back(tau);
        tr.beta_values.push_back(eta.values[0]);
        double mn = eta.min_value();
        tr.masses.push_back(m);
        tr.min_values.push_back(mn);
        std::vector<double> nv;
        if (!opt.norms.empty()) {
            GridDensity diff = eta;
            if (opt.reference)
                for (std::size_t i = 0; i < M; ++i) diff.values[i] -= opt.reference->values[i];
            for (const auto& s : opt.norms) nv.push_back(weighted_norm(diff, s));
        }
        tr.norms.push_back(std::move(nv));
        if (step % std::size_t(opt.snapshot_stride) == 0 || last) {
            tr.snapshot_taus.push_back(tau);
            tr.snapshots.push_back(eta);
        }
        if (std::abs(m - 1.0) > opt.mass_tol) throw NumericalError("integrate: mass drifted beyond tolerance");
        if (mn < -opt.negativity_tol) throw NumericalError("integrate: negative values beyond tolerance");
    };

    const auto steps = std::size_t(std::ceil(tau_end / opt.dtau - 1e-9));
    double tau = 0.0;
    GridDensity eta = eta0;
    // mass of the initial piece, tracked exactly: its grid quadrature is poor across jumps
    double initial_mass = eta0.mass();
    record(0.0, eta, initial_mass, 0, steps == 0);
    for (std::size_t n = 0; n < steps; ++n) {
        const double dt = n + 1 == steps ? tau_end - tau : opt.dtau;
        const double next = tau + dt;

        // midpoint predictor: transport half a step, add half a step of source
        double A_half = 0.0;
        for (const auto& p : pieces) A_half += interp_outflow(p, tau, 0.5 * dt);
        GridDensity mid(h, std::vector<double>(M, 0.0));
        for (const auto& p : pieces) detail::add_transported(mid.values, h, p.g, tau + 0.5 * dt - p.born, opt.interp);
        if (A_half > 0.0) {
            auto G0 = detail::source_shape(k, eta, opt.overflow_tol);
            double g0 = G0.mass();
            if (g0 > 0.0)
                for (std::size_t i = 0; i < M; ++i) mid.values[i] += A_half / g0 * G0.values[i];
        }

        std::vector<double> v(M, 0.0);
        double A = 0.0;
        for (std::size_t j = 0; j < pieces.size(); ++j) {
            auto& p = pieces[j];
            auto s = sampled(p.g, next - p.born);
            double m = s.mass();
            double out = j == 0 ? interp_outflow(p, tau, dt) : p.mass - m;
            if (j == 0) initial_mass -= out;
            A += out;
            p.mass = m;
            for (std::size_t i = 0; i < M; ++i) v[i] += s.values[i];
        }
        Piece src{detail::source_shape(k, mid, opt.overflow_tol), tau + 0.5 * dt, A};
        auto s = sampled(src.g, next - src.born);
        double m = s.mass();
        if (m > 0.0 && A != 0.0) {
            for (double& x : src.g.values) x *= A / m;
            for (std::size_t i = 0; i < M; ++i) v[i] += s.values[i] * (A / m);
            pieces.push_back(std::move(src));
        }
        tau = next;
        eta = GridDensity(h, std::move(v));
        tr.outflows.push_back(A);
        double total = initial_mass;
        for (std::size_t j = 1; j < pieces.size(); ++j) total += pieces[j].mass;
        record(tau, eta, total, n + 1, n + 1 == steps);
    }
    return tr;
}

inline EvolutionTrace integrate(const Kernel& k, const GridDensity& eta0, double tau_end, double dtau = std::log(2.0) / 32.0)
{
    IntegrateOptions opt;
    opt.dtau = dtau;
    return integrate(k, eta0, tau_end, opt);
}

/// beta(tau) = e^{tau - tau0} eta(tau0, e^{tau - tau0}) from the latest snapshot tau0 with tau - tau0 in [0, log 2].
inline double trace_beta(const EvolutionTrace& tr, double tau, Interp mode = Interp::cubic)
{
    for (std::size_t i = tr.snapshot_taus.size(); i-- > 0;) {
        double dt = tau - tr.snapshot_taus[i];
        if (dt < -1e-12) continue;
        if (dt > std::log(2.0) + 1e-12) break;
        dt = std::max(dt, 0.0);
        const auto& s = tr.snapshots[i];
        return std::exp(dt) * (dt == 0.0 ? s.values[0] : interpolate(s, std::exp(dt), mode));
    }
    throw DomainError("trace_beta: no snapshot within log 2 before tau");
}

/// rho(t, x) = eta(x / t) / t on the x grid t + i t h.
inline GridDensity unscale(const GridDensity& eta, double t)
{
    detail::require(t >= 1.0, "unscale: t must be >= 1");
    GridDensity out = eta;
    out.h = eta.h * t;
    out.y0 = eta.y0 * t;
    out.support_min = eta.support_min * t;
    for (double& v : out.values) v /= t;
    return out;
}

struct NumberDensitySample {
    double t;
    double N;
};

/**
 * @brief N(t) from dN/dt = -q (beta(log t) / t) N, i.e. dN/dtau = -q beta N.
 *
 * Uses the per-step outflow integrals when present, the trapezoid rule on beta otherwise.
 */
inline std::vector<NumberDensitySample> recover_number_density(const Kernel& k, const EvolutionTrace& tr, double N0)
{
    detail::require(N0 > 0.0, "recover_number_density: N0 must be positive");
    std::vector<NumberDensitySample> out;
    if (tr.taus.empty()) return out;
    double logN = std::log(N0);
    out.push_back({std::exp(tr.taus[0]), N0});
    bool have = tr.outflows.size() + 1 == tr.taus.size();
    for (std::size_t n = 0; n + 1 < tr.taus.size(); ++n) {
        double I = have ? tr.outflows[n] : 0.5 * (tr.taus[n + 1] - tr.taus[n]) * (tr.beta_values[n] + tr.beta_values[n + 1]);
        logN -= k.q() * I;
        out.push_back({std::exp(tr.taus[n + 1]), std::exp(logN)});
    }
    return out;
}

struct RateFit {
    double rate = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;
    double floor = 1e-12;  ///< norms below this are treated as numerical noise
    std::vector<double> taus;
    std::vector<double> norms;
};

/// Least-squares slope of log(norm) against tau; rate = -slope. Degenerate when a norm is below the floor.
inline RateFit fit_rate(std::vector<double> taus, std::vector<double> norms, double floor = 1e-12)
{
    RateFit f;
    f.floor = std::max(floor, 1e-12);
    f.taus = std::move(taus);
    f.norms = std::move(norms);
    const std::size_t n = f.taus.size();
    if (n < 2) throw ConfigError("fit_rate: need at least two samples");
    for (double v : f.norms)
        if (!(v >= f.floor)) {
            f.degenerate = true;
            return f;
        }
    double st = 0, sl = 0, stt = 0, stl = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double t = f.taus[i], l = std::log(f.norms[i]);
        st += t, sl += l, stt += t * t, stl += t * l;
    }
    double slope = (n * stl - st * sl) / (n * stt - st * st);
    f.rate = -slope;
    return f;
}

struct RateOptions {
    double tau_a = 1.0, tau_b = 3.0;
    int samples = 9;
    double theta = 1.0;
    GridSpec grid{};
};

/**
 * @brief Decay rate of ||eta(tau) - eta*_theta||_{2, gamma - theta} along the exact evolution.
 *
 * The decomposition of eta0 is given; eta*_theta is the inverse at d = 0 on the same grid.
 * For theta = 1 the floor is ten times the largest distance obtained by running
 * eta*_1 itself through the same pipeline (its grid sampling leaves a small d).
 */
inline RateFit convergence_rate(const Linearizer& L, const CounterTermDecomposition& dec, double gamma, double tau_a, double tau_b, int samples)
{
    detail::require(tau_b > tau_a && tau_a >= 0.0, "convergence_rate: window must satisfy 0 <= tau_a < tau_b");
    detail::require(samples >= 2, "convergence_rate: need at least two samples");
    auto ref = L.steady(dec.theta);
    auto distance = [&](const CounterTermDecomposition& c, double tau) {
        auto eta = L.inverse(L.shifted(c, tau));
        for (std::size_t j = 0; j < eta.size(); ++j) eta.values[j] -= ref.values[j];
        return weighted_norm(eta, {2, gamma - dec.theta});
    };
    std::optional<CounterTermDecomposition> self;
    if (dec.theta == 1.0) self = L.forward(ref, 1.0);
    std::vector<double> taus, norms;
    double floor = 0.0;
    for (int i = 0; i < samples; ++i) {
        double tau = tau_a + (tau_b - tau_a) * i / (samples - 1);
        taus.push_back(tau);
        norms.push_back(distance(dec, tau));
        if (self) floor = std::max(floor, 10.0 * distance(*self, tau));
    }
    return fit_rate(std::move(taus), std::move(norms), floor);
}

inline RateFit convergence_rate(const Kernel& k, const GridDensity& eta0, double gamma, const RateOptions& opt = {})
{
    detail::require(gamma > 1.5 || opt.theta < 1.0, "convergence_rate: gamma must exceed 3/2");
    GridSpec g = opt.grid;
    g.h = eta0.h;
    g.y_max = eta0.y_max();
    Linearizer L(k, g);
    return convergence_rate(L, L.forward(eta0, opt.theta), gamma, opt.tau_a, opt.tau_b, opt.samples);
}

namespace detail {

/// h sum_m w_m a_m b_{i-m}, both on the grid 1 + i h; result on the grid 2 + i h.
inline std::vector<double> grid_convolve(const GridDensity& a, const GridDensity& b)
{
    std::vector<double> wa(a.size());
    for (std::size_t m = 0; m < a.size(); ++m) wa[m] = start_weight(std::ptrdiff_t(m)) * a.values[m];
    auto c = convolve(wa, b.values, a.size() + b.size() - 1);
    for (double& x : c) x *= a.h;
    return c;
}

/// (y b)' by fourth order differences, one-sided near the ends.
inline std::vector<double> derivative_yb(const GridDensity& b)
{
    const std::size_t M = b.size();
    std::vector<double> f(M), d(M, 0.0);
    for (std::size_t i = 0; i < M; ++i) f[i] = b.y(i) * b.values[i];
    const double h = b.h;
    for (std::size_t i = 0; i < M; ++i) {
        if (M < 5) {
            d[i] = i == 0 ? (f[1] - f[0]) / h : (i + 1 == M ? (f[i] - f[i - 1]) / h : (f[i + 1] - f[i - 1]) / (2 * h));
        } else if (i < 2) {
            d[i] = (-25 * f[i] + 48 * f[i + 1] - 36 * f[i + 2] + 16 * f[i + 3] - 3 * f[i + 4]) / (12 * h);
        } else if (i + 2 >= M) {
            d[i] = (25 * f[i] - 48 * f[i - 1] + 36 * f[i - 2] - 16 * f[i - 3] + 3 * f[i - 4]) / (12 * h);
        } else {
            d[i] = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * h);
        }
    }
    return d;
}

} // namespace detail

/**
 * @brief Linearized operator at eta*_1:
 * (A b)(y) = (y b)'(y) + (1/q) T1(Q'[eta*] * b)(y) + b(1) (T1 Q[eta*])(y),
 * with Q'[eta] = sum_j j p_j eta^{*(j-1)} and eta^{*0} the unit mass at 0.
 */
inline GridDensity linearized_apply(const Kernel& k, const GridDensity& b, const GridDensity& eta_star)
{
    detail::require(b.y0 == 1.0 && eta_star.y0 == 1.0, "linearized_apply: grids must start at y = 1");
    detail::require(b.h == eta_star.h && b.size() == eta_star.size(), "linearized_apply: grid mismatch");
    const std::size_t c = cells_per_unit(b.h);
    if (std::abs(b.mass()) > 1e-8) throw ConfigError("linearized_apply: b must have mean zero");
    const std::size_t M = b.size();
    const double q = k.q();
    auto out_v = detail::derivative_yb(b);

    // conv[i] holds (Q'[eta*] * b) at y = 1 + i h; eta^{*m} lives on [m, inf), grid m + i h
    std::vector<double> conv(M, 0.0);
    const auto& p = k.weights();
    for (std::size_t i = 0; i < M; ++i) conv[i] += p[0] * b.values[i];
    GridDensity power = eta_star;  // eta^{*m} on m + i h, m = 1 here
    for (int j = 2; j <= k.degree(); ++j) {
        const int m = j - 1;
        if (p[j - 1] != 0.0) {
            // (eta^{*m} * b)(y) with y = (m + 1) + i h: index shift of m cells below 1 + i h
            auto cv = detail::grid_convolve(power, b);
            for (std::size_t i = 0; i < cv.size(); ++i) {
                std::size_t idx = i + std::size_t(m) * c;
                if (idx < M) conv[idx] += j * p[j - 1] * cv[i];
            }
        }
        if (j < k.degree()) {
            auto next = detail::grid_convolve(eta_star, power);
            next.resize(M);
            power.values = std::move(next);
        }
    }
    auto TQ = detail::source_shape(k, eta_star, std::numeric_limits<double>::infinity());
    const double b1 = b.values[0];
    for (std::size_t i = 0; i < M; ++i) {
        double shifted = i >= c ? conv[i - c] : 0.0;
        out_v[i] += shifted / q + b1 * TQ.values[i];
    }
    return GridDensity(b.h, std::move(out_v));
}

inline GridDensity linearized_apply(const Kernel& k, const GridDensity& b)
{
    return linearized_apply(k, b, steady_state_spectral(k, 1.0, GridSpec{b.h, b.y_max(), 4, 0}));
}

/**
 * @brief Mean-zero Lipschitz test function: -a on [1, Y], linear on [Y, Y + 1], y^{-delta} beyond.
 *
 * a is set so that the grid mass vanishes.
 */
inline GridDensity b_delta(double delta, double h, double y_max, double Y = 1.0)
{
    detail::require(delta > 1.0, "b_delta: delta must exceed 1");
    detail::require(Y >= 1.0 && y_max > Y + 1.0, "b_delta: need 1 <= Y and Y + 1 < y_max");
    const double c = std::pow(Y + 1.0, -delta);
    auto neg = sample(h, y_max, [&](double y) { return y <= Y ? -1.0 : (y < Y + 1.0 ? -(Y + 1.0 - y) : 0.0); });
    auto pos = sample(h, y_max, [&](double y) { return y <= Y ? 0.0 : (y < Y + 1.0 ? c * (y - Y) : std::pow(y, -delta)); });
    double a = -pos.mass() / neg.mass();
    for (std::size_t i = 0; i < pos.size(); ++i) pos.values[i] += a * neg.values[i];
    return pos;
}

struct SpectralProbe {
    double delta;
    double ratio;  ///< ||A b + (gamma - 3/2) b||_{2,gamma} / ||b||_{2,gamma}
};

/// Ratio for each delta; it should shrink as delta decreases to gamma + 1/2.
inline std::vector<SpectralProbe> spectral_probe(const Kernel& k, double gamma, const std::vector<double>& deltas, double h = 1.0 / 16.0, double y_max = 2049.0)
{
    // eta*_1 decays exponentially, so it is computed on [1, 129] at a finer step and padded with zeros
    const std::size_t r = std::max<std::size_t>(1, 64 / cells_per_unit(h));
    auto fine = steady_state_spectral(k, 1.0, GridSpec{h / double(r), std::min(y_max, 129.0), 4, 0});
    GridDensity eta(h, std::vector<double>(std::size_t(std::llround((y_max - 1.0) / h)) + 1, 0.0));
    for (std::size_t i = 0; i * r < fine.size(); ++i) eta.values[i] = fine.values[i * r];
    std::vector<SpectralProbe> out;
    for (double d : deltas) {
        detail::require(d > gamma + 0.5, "spectral_probe: delta must exceed gamma + 1/2");
        auto b = b_delta(d, h, y_max);
        auto Ab = linearized_apply(k, b, eta);
        for (std::size_t i = 0; i < Ab.size(); ++i) Ab.values[i] += (gamma - 1.5) * b.values[i];
        out.push_back({d, weighted_norm(Ab, {2, gamma}) / weighted_norm(b, {2, gamma})});
    }
    return out;
}

} // namespace coarsen
