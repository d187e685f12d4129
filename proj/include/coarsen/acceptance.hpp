#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "coarsen/evolve.hpp"
#include "coarsen/kernel.hpp"
#include "coarsen/linearize.hpp"
#include "coarsen/mc.hpp"
#include "coarsen/profiles.hpp"
#include "coarsen/special.hpp"

namespace coarsen::acceptance {

struct Result {
    int id = 0;
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, double>> measured;
    std::string note;
    double seconds = 0.0;
};

struct Criterion {
    int id;
    std::string name;
    std::function<void(Result&)> run;
};

namespace detail {

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

inline GridDensity gamma2(double h, double y_max)
{
    return sample(h, y_max, [](double y) { return 0.25 * (y - 1.0) * std::exp(-(y - 1.0) / 2.0); });
}

inline double l1(const GridDensity& a, const GridDensity& b)
{
    GridDensity d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d.values[i] -= b.values[i];
    return weighted_norm(d, {1, 0.0});
}

inline std::string cdf_csv(const EmpiricalCdf& F, const GridDensity& ref)
{
    std::ostringstream os;
    os << std::setprecision(17);
    for (const auto& r : cdf_table(F, ref, 16.0)) os << r.y << ',' << r.emp << ',' << r.ref << ',' << r.diff << '\n';
    return os.str();
}

} // namespace detail

inline std::vector<Criterion> criteria()
{
    using detail::rel;
    const Kernel z2({0.0, 1.0});
    std::vector<Criterion> c;

    c.push_back({1, "kernel constants for Q = z^2", [z2](Result& r) {
        double q = z2.q(), kappa = z2.kappa(), R = z2.radius_R();
        r.measured = {{"q", q}, {"kappa", kappa}, {"R", R}};
        r.pass = q == 2.0 && std::abs(kappa - 0.5) <= 1e-10 && std::abs(R - 2.0) <= 1e-10;
    }});

    c.push_back({2, "Psi series coefficients", [z2](Result& r) {
        double err = 0.0;
        for (int k = 1; k <= 50; ++k) err = std::max(err, std::abs(z2.psi_coeffs()[k] - std::ldexp(1.0, -k)));
        double worst = std::numeric_limits<double>::infinity();
        for (auto w : std::vector<std::vector<double>>{{1.0}, {0.0, 1.0}, {0.5, 0.5}, {0.3, 0.0, 0.7}}) {
            Kernel k(w, 128);
            for (int j = 1; j <= 128; ++j) worst = std::min(worst, k.psi_coeffs()[j]);
        }
        r.measured = {{"max |Psi_k - 2^-k|, k <= 50", err}, {"min Psi_k over four kernels, k <= 128", worst}};
        r.pass = err <= 1e-12 && worst >= 0.0;
    }});

    c.push_back({3, "steady state: spectral vs ODE (Q = z^2, theta = 1)", [z2](Result& r) {
        auto t0 = std::chrono::steady_clock::now();
        auto sp = steady_state_spectral(z2, 1.0);
        auto ode = steady_state_ode(z2, 0.5, sp.y_max(), sp.h);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double err = 0.0;
        for (std::size_t i = 0; sp.y(i) <= 12.0; ++i) err = std::max(err, std::abs(sp.values[i] - ode.values[i]));
        r.measured = {{"sup difference on [1, 12]", err}, {"runtime s", secs}};
        r.pass = err <= 1e-4 && secs < 10.0;
    }});

    c.push_back({4, "first moment of eta*_1", [z2](Result& r) {
        double m = steady_state_spectral(z2, 1.0).moment(1.0), target = 2.0 * std::exp(euler_gamma);
        r.measured = {{"moment", m}, {"2 e^gamma", target}, {"relative error", rel(m, target)}};
        r.pass = rel(m, target) <= 1e-3;
    }});

    c.push_back({5, "tail law of eta*_{1/2}", [z2](Result& r) {
        auto g = steady_state_spectral(z2, 0.5, GridSpec{1.0 / 16, 400.0, 4, std::size_t(1) << 20});
        double v = std::pow(300.0, 1.5) * g.at(300.0);
        // Gamma(1/2) = sqrt(pi), kappa = 1/2
        double target = 0.5 * std::exp(0.5 * euler_gamma) / (0.5 * std::sqrt(pi));
        r.measured = {{"y^1.5 eta(300)", v}, {"tail constant", target}, {"library tail constant", tail_constant(z2, 0.5)}, {"relative error", rel(v, target)}};
        r.pass = rel(v, target) <= 0.03;
    }});

    c.push_back({6, "Dickmann cross-check (Q = z)", [](Result& r) {
        auto g = steady_state_ode(Kernel({1.0}), 1.0, 16.0);
        double v = 3.0 * g.at(3.0), target = 1.0 - std::log(2.0);
        r.measured = {{"3 eta(3)", v}, {"1 - log 2", target}, {"error", std::abs(v - target)}};
        r.pass = std::abs(v - target) <= 1e-6;
    }});

    c.push_back({7, "unit-disk margin and K(xi)", [](Result& r) {
        auto grid = log_grid(1e-3, 100.0, 4001);
        auto m = appendix_a_margin(1.0, grid);
        double K0 = K_of_xi(1e-3), target = std::log(2.0) - euler_gamma;
        r.measured = {{"min margin", m.margin}, {"xi at min", m.xi_at_margin}, {"min K", m.K_min}, {"K(1e-3)", K0}, {"log 2 - gamma", target}};
        r.pass = m.margin > 0.0 && m.K_min > 0.0 && std::abs(K0 - target) <= 1e-3;
    }});

    c.push_back({8, "theta* for Q = z^2", [z2](Result& r) {
        double t = z2.theta_star();
        r.measured = {{"theta*", t}, {"error", std::abs(t - 3.24826)}};
        r.pass = std::abs(t - 3.24826) <= 1e-3;
    }});

    c.push_back({9, "direct integrator vs exact evolution (uniform, tau = 1)", [z2](Result& r) {
        auto u = uniform_density(1.0 / 64, 64.0);
        const double dtau = std::log(2.0) / 128;
        auto tr = integrate(z2, u, 1.0, dtau);
        double d = detail::l1(tr.snapshots.back(), evolve_exact(z2, u, 1.0));
        r.measured = {{"L1 difference", d}, {"dtau", dtau}, {"h", u.h}};
        r.pass = d <= 1e-3;
    }});

    c.push_back({10, "convergence rate, gamma = 3 (uniform start)", [z2](Result& r) {
        auto f = convergence_rate(z2, uniform_density(1.0 / 64, 64.0), 3.0);
        r.measured = {{"fitted rate", f.rate}, {"target", 1.5}, {"relative error", rel(f.rate, 1.5)}};
        r.pass = !f.degenerate && rel(f.rate, 1.5) <= 0.15;
    }});

    c.push_back({11, "heavy-tail rate, theta = 1/2, gamma = 1.2", [z2](Result& r) {
        const double theta = 0.5, gamma = 1.2;
        Linearizer L(z2, GridSpec{1.0 / 64, 64.0});
        const auto& T = L.transform();
        // 0.9 eta*_{1/2} + 0.1 uniform[1, 2], from the exact transforms
        SpectralFunction s{T.xi_step(), std::vector<cplx>(T.length())};
        s.samples[0] = 1.0;
        for (std::size_t j = 1; j < T.length(); ++j) {
            double xi = T.xi(j);
            cplx ix(0.0, xi);
            cplx star = z2.psi_eval(1.0 - std::exp(-theta * w_star_hat(xi)), 1e-12);
            s.samples[j] = 0.9 * star + 0.1 * (std::exp(-ix) - std::exp(-2.0 * ix)) / ix;
        }
        auto f = convergence_rate(L, L.forward_spectrum(s, theta), gamma, 1.0, 3.0, 9);
        const double target = gamma - theta - 0.5;
        r.measured = {{"fitted rate", f.rate}, {"target", target}, {"relative error", rel(f.rate, target)}};
        r.pass = !f.degenerate && rel(f.rate, target) <= 0.25;
    }});

    c.push_back({12, "Monte Carlo attractor (mean field, growth x8)", [z2](Result& r) {
        auto ref = steady_state_spectral(z2, 1.0);
        auto run = [&](double& ks, double& drift, std::size_t& size) {
            auto e = init_ensemble(200000, LengthSampler::parse("uniform:1:2"), 1);
            double L0 = e.total_length();
            e.run_until(z2, 8.0);
            drift = std::abs(e.total_length() - L0) / L0;
            size = e.size();
            auto F = empirical_rescaled(e);
            ks = ks_distance(F, ref);
            return std::make_pair(detail::cdf_csv(F, ref), F);
        };
        double ks = 0, drift = 0, ks2 = 0, drift2 = 0;
        std::size_t n = 0, n2 = 0;
        auto [a, F] = run(ks, drift, n);
        auto b = run(ks2, drift2, n2).first;
        bool same = a == b;
        // the mean-field limit at the same time, for reference
        double ks_pde = ks_distance(F, evolve_exact(z2, uniform_density(1.0 / 64, 64.0), std::log(8.0)));
        r.measured = {{"KS to eta*_1", ks}, {"relative length drift", drift}, {"byte-identical rerun", same ? 1.0 : 0.0}, {"final population", double(n)}, {"KS to exact evolution at tau = log 8", ks_pde}};
        r.pass = ks <= 0.02 && drift <= 1e-9 && same;
    }});

    c.push_back({13, "complete monotonicity of the Laplace transform", [z2](Result& r) {
        double worst = std::numeric_limits<double>::infinity();
        for (double theta : {0.5, 1.0}) {
            double m = laplace_cm_margin(steady_state_spectral(z2, theta), 0.1, 2.0, 0.05, 6);
            r.measured.push_back({"margin theta = " + std::to_string(theta).substr(0, 3), m});
            worst = std::min(worst, m);
        }
        r.pass = worst >= -1e-8;
    }});

    c.push_back({14, "integrator mass and positivity, tau in [0, 3]", [z2](Result& r) {
        const double h = 1.0 / 64, y_max = 64.0;
        std::vector<std::pair<std::string, GridDensity>> inits = {
            {"eta*_1", steady_state_spectral(z2, 1.0, GridSpec{h, y_max})},
            {"exponential", sample(h, y_max, [](double y) { return std::exp(-(y - 1.0)); })},
            {"gamma(2)", detail::gamma2(h, y_max)}};
        bool ok = true;
        for (const auto& [name, g] : inits) {
            auto tr = integrate(z2, g, 3.0);
            double worst = 0.0, mn = std::numeric_limits<double>::infinity();
            for (std::size_t n = 0; n < tr.taus.size(); ++n) {
                worst = std::max(worst, std::abs(tr.masses[n] - 1.0) / (1.0 + tr.taus[n]));
                mn = std::min(mn, tr.min_values[n]);
            }
            for (std::size_t n = 0; n < tr.snapshots.size(); ++n)
                worst = std::max(worst, std::abs(tr.snapshots[n].mass() - 1.0) / (1.0 + tr.snapshot_taus[n]));
            r.measured.push_back({name + " max |mass - 1| / (1 + tau)", worst});
            r.measured.push_back({name + " min value", mn});
            ok = ok && worst <= 1e-6 && mn >= -1e-6;
        }
        r.pass = ok;
    }});

    c.push_back({15, "moment identities for the uniform density", [z2](Result& r) {
        Linearizer L(z2, GridSpec{1.0 / 64, 64.0});
        auto dec = L.forward(uniform_density(1.0 / 64, 64.0), 1.0);
        double target0 = (euler_gamma - std::log(0.5 * 1.5)) / 2.0;
        auto eta = L.inverse(dec);
        double m = eta.moment(1.0), target1 = 2.0 * std::exp(euler_gamma - 2.0 * dec.d0);
        r.measured = {{"d0", dec.d0}, {"(gamma - log(kappa mu)) / q", target0}, {"round-trip moment", m}, {"e^(gamma - q d0) / kappa", target1}, {"min value", eta.min_value()}};
        r.pass = std::abs(dec.d0 - target0) <= 1e-4 && eta.min_value() >= -1e-6 && rel(m, target1) <= 1e-3;
    }});

    return c;
}

/// Runs the selected criteria (all when empty) in order.
inline std::vector<Result> run(const std::set<int>& only = {}, const std::function<void(const Result&)>& on_done = {})
{
    std::vector<Result> out;
    for (const auto& c : criteria()) {
        if (!only.empty() && !only.count(c.id)) continue;
        Result r;
        r.id = c.id;
        r.name = c.name;
        auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(r);
        } catch (const std::exception& e) {
            r.pass = false;
            r.note = e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_done) on_done(r);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string format_line(const Result& r)
{
    std::ostringstream os;
    os << (r.pass ? "PASS" : "FAIL") << "  criterion " << r.id << ": " << r.name << " |";
    os << std::setprecision(6);
    for (const auto& [k, v] : r.measured) os << ' ' << k << " = " << v << ';';
    if (!r.note.empty()) os << " error: " << r.note;
    os << " (" << std::setprecision(3) << r.seconds << " s)";
    return os.str();
}

} // namespace coarsen::acceptance
