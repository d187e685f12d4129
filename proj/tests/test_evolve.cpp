#include <gtest/gtest.h>

#include "coarsen/evolve.hpp"

using namespace coarsen;

namespace {
const Kernel& kz2()
{
    static const Kernel k({0.0, 1.0});
    return k;
}

const GridDensity& steady()
{
    static const GridDensity g = steady_state_spectral(kz2(), 1.0, GridSpec{1.0 / 64, 64.0});
    return g;
}

double l1_distance(const GridDensity& a, const GridDensity& b)
{
    GridDensity d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d.values[i] -= b.values[i];
    return weighted_norm(d, {1, 0.0});
}

double sup_distance(const GridDensity& a, const GridDensity& b)
{
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a.values[i] - b.values[i]));
    return e;
}
} // namespace

TEST(Integrate, SteadyStateIsStationary)
{
    auto tr = integrate(kz2(), steady(), 1.0);
    double drift = 0.0;
    for (const auto& s : tr.snapshots) drift = std::max(drift, sup_distance(s, steady()));
    EXPECT_LE(drift, 1e-4);
    for (double b : tr.beta_values) EXPECT_NEAR(b, 0.5, 1e-4);
}

TEST(Integrate, UniformTraceIsExponentialBeforeLogTwo)
{
    auto tr = integrate(kz2(), uniform_density(1.0 / 64, 64.0), 1.0);
    std::size_t checked = 0;
    for (std::size_t n = 0; n < tr.taus.size(); ++n) {
        if (tr.taus[n] >= std::log(2.0) - 1e-12) break;
        EXPECT_NEAR(tr.beta_values[n], std::exp(tr.taus[n]), 1e-12) << tr.taus[n];
        ++checked;
    }
    EXPECT_EQ(checked, 32u);
}

TEST(Integrate, ConservesMassAndPositivity)
{
    auto gamma2 = sample(1.0 / 64, 64.0, [](double y) { return 0.25 * (y - 1.0) * std::exp(-(y - 1.0) / 2.0); });
    auto tr = integrate(kz2(), gamma2, 3.0);
    for (std::size_t n = 0; n < tr.taus.size(); ++n) {
        EXPECT_LE(std::abs(tr.masses[n] - 1.0), 1e-6 * (1.0 + tr.taus[n]));
        EXPECT_GE(tr.min_values[n], -1e-6);
    }
    for (std::size_t n = 1; n < tr.taus.size(); ++n) ASSERT_GT(tr.taus[n], tr.taus[n - 1]);
    EXPECT_NEAR(tr.taus.back(), 3.0, 1e-14);
}

TEST(Integrate, StepHalvingReducesDefect)
{
    auto u = uniform_density(1.0 / 64, 64.0);
    auto exact = evolve_exact(kz2(), u, 1.0);
    double e1 = l1_distance(integrate(kz2(), u, 1.0, std::log(2.0) / 32).snapshots.back(), exact);
    double e2 = l1_distance(integrate(kz2(), u, 1.0, std::log(2.0) / 64).snapshots.back(), exact);
    EXPECT_GE(e1 / e2, 1.8) << e1 << " " << e2;
}

TEST(Integrate, SmoothDataAgreesWithExactEvolution)
{
    auto g = sample(1.0 / 64, 64.0, [](double y) { return 0.25 * (y - 1.0) * std::exp(-(y - 1.0) / 2.0); });
    auto tr = integrate(kz2(), g, 1.0);
    EXPECT_LT(l1_distance(tr.snapshots.back(), evolve_exact(kz2(), g, 1.0)), 1e-4);
}

TEST(Integrate, RecordsNormsAgainstReference)
{
    IntegrateOptions opt;
    opt.norms = {{2, 1.0}, {1, 0.0}};
    opt.reference = steady();
    opt.snapshot_stride = 8;
    auto tr = integrate(kz2(), uniform_density(1.0 / 64, 64.0), 1.0, opt);
    ASSERT_EQ(tr.norms.size(), tr.taus.size());
    EXPECT_EQ(tr.norms[0].size(), 2u);
    EXPECT_GT(tr.norms.front()[0], tr.norms.back()[0]);
    // every eighth step plus the last one
    EXPECT_EQ(tr.snapshot_taus.size(), 1u + (tr.taus.size() - 1 + 7) / 8);
}

TEST(Integrate, RejectsBadInput)
{
    auto u = uniform_density(1.0 / 64, 16.0);
    EXPECT_THROW(integrate(kz2(), u, 1.0, 0.2), ConfigError);
    auto heavy = u;
    for (auto& v : heavy.values) v *= 2.0;
    EXPECT_THROW(integrate(kz2(), heavy, 1.0), ConfigError);
}

TEST(TraceBeta, SteadyStateIsThetaOverQ)
{
    auto tr = integrate(kz2(), steady(), 1.0);
    for (double tau : {0.1, 0.5, 0.9, 1.0}) EXPECT_NEAR(trace_beta(tr, tau), 0.5, 1e-4);
    EXPECT_EQ(trace_beta(tr, 0.0), tr.snapshots[0].values[0]);
}

TEST(TraceBeta, WindowsAgree)
{
    IntegrateOptions opt;
    opt.snapshot_stride = 4;
    auto g = sample(1.0 / 64, 64.0, [](double y) { return std::exp(-(y - 1.0)); });
    auto tr = integrate(kz2(), g, 1.5, opt);
    // from the snapshot at tau = 0.5 and from the one just below 1.2
    EXPECT_NEAR(tr.snapshot_taus[1], std::log(2.0) / 8.0, 1e-14);
    const double tau = 1.2;
    EXPECT_NEAR(trace_beta(tr, tau), std::exp(tau - tr.snapshot_taus[2]) * tr.snapshots[2].at(std::exp(tau - tr.snapshot_taus[2])), 1e-5);
    EXPECT_THROW(trace_beta(EvolutionTrace{}, 0.5), DomainError);
}

TEST(Unscale, ChangeOfVariables)
{
    const auto& s = steady();
    auto same = unscale(s, 1.0);
    EXPECT_EQ(same.values, s.values);
    const double t = std::exp(1.0);
    auto rho = unscale(s, t);
    EXPECT_NEAR(rho.mass(), s.mass(), 1e-13);
    for (double x : {3.0, 5.0, 10.0}) EXPECT_NEAR(rho.at(x), s.at(x / t) / t, 1e-7);
    EXPECT_DOUBLE_EQ(rho.y0, t);
    EXPECT_THROW(unscale(s, 0.5), ConfigError);
}

TEST(NumberDensity, SteadyStateDecaysLikeOneOverT)
{
    // outflows of exactly beta dtau with beta = 1/2
    EvolutionTrace exact;
    for (int n = 0; n <= 64; ++n) {
        exact.taus.push_back(n / 32.0);
        exact.beta_values.push_back(0.5);
        if (n) exact.outflows.push_back(0.5 / 32.0);
    }
    for (const auto& s : recover_number_density(kz2(), exact, 1000.0)) EXPECT_NEAR(s.N / (1000.0 / s.t), 1.0, 1e-12);

    // along the integrator the trace carries its own O(h^2) drift
    auto tr = integrate(kz2(), steady(), 2.0);
    auto N = recover_number_density(kz2(), tr, 1000.0);
    ASSERT_EQ(N.size(), tr.taus.size());
    for (const auto& s : N) EXPECT_NEAR(s.N / (1000.0 / s.t), 1.0, 1e-4) << s.t;
}

TEST(NumberDensity, ConstantWithoutOutflow)
{
    EvolutionTrace tr;
    tr.taus = {0.0, 0.5, 1.0};
    tr.beta_values = {0.0, 0.0, 0.0};
    auto N = recover_number_density(kz2(), tr, 7.0);
    for (const auto& s : N) EXPECT_NEAR(s.N, 7.0, 1e-14);
    // the trapezoid fallback with beta = 1/2 gives t^{-1} exactly
    tr.beta_values = {0.5, 0.5, 0.5};
    N = recover_number_density(kz2(), tr, 1.0);
    EXPECT_NEAR(N.back().N, std::exp(-1.0), 1e-15);
}

TEST(Rate, FitOfExactExponential)
{
    std::vector<double> taus, norms;
    for (int i = 0; i < 5; ++i) {
        taus.push_back(1.0 + 0.5 * i);
        norms.push_back(3.0 * std::exp(-1.25 * taus.back()));
    }
    auto f = fit_rate(taus, norms);
    EXPECT_FALSE(f.degenerate);
    EXPECT_NEAR(f.rate, 1.25, 1e-12);
    norms[2] = 1e-13;
    EXPECT_TRUE(fit_rate(taus, norms).degenerate);
}

TEST(Rate, SteadyStateIsDegenerate)
{
    auto f = convergence_rate(kz2(), steady(), 3.0);
    EXPECT_TRUE(f.degenerate);
    EXPECT_THROW(convergence_rate(kz2(), steady(), 1.0), ConfigError);
}

TEST(Linearized, ZeroMapsToZero)
{
    auto b = sample(1.0 / 32, 32.0, [](double) { return 0.0; });
    auto Ab = linearized_apply(kz2(), b);
    for (double v : Ab.values) EXPECT_EQ(v, 0.0);
    auto c = sample(1.0 / 32, 32.0, [](double y) { return y < 2.0 ? 1.0 : 0.0; });
    EXPECT_THROW(linearized_apply(kz2(), c), ConfigError);
}

TEST(Linearized, SupportStructure)
{
    const double h = 1.0 / 64;
    // mean zero, supported in [1, 2], smooth at y = 2
    auto b = sample(h, 32.0, [](double y) { return y <= 2.0 ? std::cos(pi * (y - 1.0)) * std::pow(2.0 - y, 2) : 0.0; });
    double m = b.mass();
    auto bump = sample(h, 32.0, [](double y) { return y <= 2.0 ? std::pow(std::sin(pi * (y - 1.0)), 2) : 0.0; });
    double mb = bump.mass();
    for (std::size_t i = 0; i < b.size(); ++i) b.values[i] -= m / mb * bump.values[i];
    ASSERT_NEAR(b.mass(), 0.0, 1e-12);
    auto Ab = linearized_apply(kz2(), b);
    auto d = detail::derivative_yb(b);
    // on [1, 3) only the transport term acts
    for (std::size_t i = 0; Ab.y(i) < 3.0 - 1e-12; ++i) EXPECT_DOUBLE_EQ(Ab.values[i], d[i]);
    double tail = 0.0;
    for (std::size_t i = 0; i < Ab.size(); ++i)
        if (Ab.y(i) >= 3.0) tail = std::max(tail, std::abs(Ab.values[i]));
    EXPECT_GT(tail, 1e-3);
    auto sn = sample(h, 8.0, [](double y) { return std::sin(y); });
    auto ds = detail::derivative_yb(sn);
    for (std::size_t i = 0; i < sn.size(); ++i) EXPECT_NEAR(ds[i], std::sin(sn.y(i)) + sn.y(i) * std::cos(sn.y(i)), 1e-7);
}

TEST(Linearized, ProbeRatioShrinksTowardsTheEdge)
{
    const double gamma = 2.0;
    auto pr = spectral_probe(kz2(), gamma, {gamma + 0.6, gamma + 0.55, gamma + 0.51});
    ASSERT_EQ(pr.size(), 3u);
    EXPECT_GT(pr[0].ratio, pr[1].ratio);
    EXPECT_GT(pr[1].ratio, pr[2].ratio);
    EXPECT_THROW(spectral_probe(kz2(), gamma, {gamma + 0.4}), ConfigError);
}

TEST(Linearized, BDeltaHasMeanZero)
{
    for (double delta : {2.51, 3.0, 4.5}) {
        auto b = b_delta(delta, 1.0 / 16, 257.0);
        EXPECT_NEAR(b.mass(), 0.0, 1e-12);
        EXPECT_LT(b.values[0], 0.0);
        EXPECT_DOUBLE_EQ(b.at(9.0), std::pow(9.0, -delta));
    }
}
