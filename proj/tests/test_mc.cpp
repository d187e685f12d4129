#include <gtest/gtest.h>

#include <numeric>

#include "coarsen/mc.hpp"
#include "coarsen/profiles.hpp"

using namespace coarsen;

namespace {
const Kernel& kz2()
{
    static const Kernel k({0.0, 1.0});
    return k;
}

const GridDensity& eta1()
{
    static const GridDensity g = steady_state_spectral(kz2(), 1.0);
    return g;
}
} // namespace

TEST(Rng, MatchesReferenceSplitmixStream)
{
    // with seed 0 the key is 0 and the stream is splitmix64 started from state 0
    CounterRng r(0);
    EXPECT_EQ(r.next(), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(r.next(), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(r.next(), 0x06C45D188009454FULL);
    EXPECT_EQ(r.counter(), 3u);
}

TEST(Rng, ResumesFromCounter)
{
    CounterRng a(42);
    for (int i = 0; i < 10; ++i) a.next();
    CounterRng b(42, 10);
    EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, BoundedDrawsAreUniform)
{
    CounterRng r(7);
    std::vector<int> hist(6, 0);
    for (int i = 0; i < 60000; ++i) {
        auto v = r.below(6);
        ASSERT_LT(v, 6u);
        ++hist[v];
    }
    // 5 sigma of the binomial count
    for (int c : hist) EXPECT_NEAR(c, 10000, 5 * std::sqrt(60000 * (1.0 / 6) * (5.0 / 6)));
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Ensemble, ConstantSampler)
{
    McEnsemble e({1.5, 1.5, 1.5, 1.5}, 1);
    EXPECT_EQ(e.lengths(), std::vector<double>(4, 1.5));
    EXPECT_EQ(e.total_length(), 6.0);
    auto f = init_ensemble(10, LengthSampler::parse("constant:1.5"), 3);
    EXPECT_EQ(f.total_length(), 15.0);
    EXPECT_EQ(f.cutoff(), 1.0);
}

TEST(Ensemble, UniformMean)
{
    auto e = init_ensemble(1000000, LengthSampler::parse("uniform:1:2"), 11);
    double mean = e.total_length() / double(e.size());
    EXPECT_GE(mean, 1.45);
    EXPECT_LE(mean, 1.55);
    // 3 sigma of the sample mean
    EXPECT_NEAR(mean, 1.5, 3.0 * std::sqrt(1.0 / 12.0 / 1e6));
}

TEST(Ensemble, FixedSeedIsBitIdentical)
{
    auto a = init_ensemble(1000, LengthSampler::parse("exp:2"), 5);
    auto b = init_ensemble(1000, LengthSampler::parse("exp:2"), 5);
    auto c = init_ensemble(1000, LengthSampler::parse("exp:2"), 6);
    EXPECT_EQ(a.lengths(), b.lengths());
    EXPECT_NE(a.lengths(), c.lengths());
}

TEST(Ensemble, RejectsBadInput)
{
    EXPECT_THROW(LengthSampler::parse("uniform:0.5:2"), ConfigError);
    EXPECT_THROW(LengthSampler::parse("constant:0.9"), ConfigError);
    EXPECT_THROW(LengthSampler::parse("gauss:1"), ConfigError);
    EXPECT_THROW(LengthSampler::parse("exp:x"), ConfigError);
    EXPECT_THROW(init_ensemble(5, LengthSampler::parse("uniform:1:2"), 1), ConfigError);
    EXPECT_THROW(McEnsemble({1.0, 0.5}, 1), ConfigError);
    EXPECT_THROW(parse_variant("torus"), ConfigError);
}

TEST(Events, ForcedMergeOfThree)
{
    for (auto v : {Variant::mean_field, Variant::ring}) {
        McEnsemble e({1.0, 2.0, 3.0}, 9, v);
        e.set_population_floor(0);
        ASSERT_TRUE(e.step(kz2()));
        EXPECT_EQ(e.lengths(), std::vector<double>{6.0});
        EXPECT_EQ(e.cutoff(), 1.0);
        EXPECT_FALSE(e.step(kz2()));
    }
}

TEST(Events, RingMergesNeighbours)
{
    // Q = z: one neighbour, side by coin; the minimum 1 sits between 5 and 7
    McEnsemble e({4.0, 5.0, 1.0, 7.0, 9.0}, 2, Variant::ring);
    e.set_population_floor(0);
    ASSERT_TRUE(e.step(Kernel({1.0})));
    // ring_order starts from the minimum, which is 4 after the merge
    auto r = e.ring_order();
    bool left = r == std::vector<double>{4.0, 6.0, 7.0, 9.0};
    bool right = r == std::vector<double>{4.0, 5.0, 8.0, 9.0};
    EXPECT_TRUE(left || right);
}

TEST(Events, ConservationCountingAndMonotoneCutoff)
{
    for (auto v : {Variant::mean_field, Variant::ring}) {
        Kernel k({0.2, 0.5, 0.3});
        auto e = init_ensemble(20000, LengthSampler::parse("uniform:1:3"), 17, v);
        e.enable_log(true);
        const double L0 = e.total_length();
        const auto n0 = e.size();
        auto rep = e.run_until(k, 6.0);
        EXPECT_FALSE(rep.early_stop);
        EXPECT_EQ(rep.events, e.events());
        EXPECT_NEAR(e.total_length(), L0, 1e-9 * L0);
        EXPECT_EQ(e.size(), n0 - e.partners_removed());
        std::uint64_t sum_j = 0;
        for (std::size_t i = 0; i < e.log().size(); ++i) {
            sum_j += std::uint64_t(e.log()[i].partners);
            if (i) {
                ASSERT_GE(e.log()[i].minimum, e.log()[i - 1].minimum);
            }
            ASSERT_GT(e.log()[i].merged, e.log()[i].minimum);
        }
        EXPECT_EQ(sum_j, e.partners_removed());
        EXPECT_EQ(e.cutoff(), 6.0);
        EXPECT_GE(e.min_length(), 6.0);
        for (double x : e.lengths()) ASSERT_GE(x, 6.0);
        if (v == Variant::ring) {
            auto r = e.ring_order();
            EXPECT_EQ(r.size(), e.size());
            EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), L0, 1e-9 * L0);
        }
    }
}

TEST(Events, MillionEventConservation)
{
    auto e = init_ensemble(2100000, LengthSampler::parse("uniform:1:2"), 23);
    const double L0 = e.total_length();
    for (int i = 0; i < 1000000; ++i) ASSERT_TRUE(e.step(kz2()));
    EXPECT_LE(std::abs(e.total_length() - L0), 1e-9 * L0);
    EXPECT_EQ(e.size(), 100000u);
}

TEST(Events, FixedSeedReproducesEventLog)
{
    auto run = [](std::uint64_t seed) {
        auto e = init_ensemble(5000, LengthSampler::parse("uniform:1:2"), seed);
        e.enable_log(true);
        e.run_until(kz2(), 4.0);
        return e.log();
    };
    auto a = run(3), b = run(3), c = run(4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].minimum, b[i].minimum);
        ASSERT_EQ(a[i].partners, b[i].partners);
        ASSERT_EQ(a[i].merged, b[i].merged);
    }
    EXPECT_FALSE(a.size() == c.size() && a.back().merged == c.back().merged);
}

TEST(Events, EarlyStopAtPopulationFloor)
{
    auto e = init_ensemble(300, LengthSampler::parse("uniform:1:2"), 1);
    auto rep = e.run_until(kz2(), 1000.0);
    EXPECT_TRUE(rep.early_stop);
    EXPECT_GE(e.size(), McEnsemble::default_floor);
    EXPECT_LT(e.size(), McEnsemble::default_floor + 2);
    EXPECT_LT(e.cutoff(), 1000.0);
}

TEST(Empirical, StepAtOne)
{
    McEnsemble e(std::vector<double>(20, 1.0), 1);
    auto F = empirical_rescaled(e);
    EXPECT_EQ(F(1.0), 1.0);
    EXPECT_EQ(F(0.999), 0.0);
    EXPECT_GE(ks_distance(F, eta1()), 0.5);
}

TEST(Empirical, ContinuousDataHasNoAtom)
{
    auto e = init_ensemble(10000, LengthSampler::parse("uniform:1:2"), 4);
    auto F = empirical_rescaled(e);
    EXPECT_LT(F(1.0), 1e-3);
    EXPECT_EQ(F(2.0), 1.0);
}

TEST(Ks, QuantilesOfReferenceAreClose)
{
    // deterministic sample at the midpoint quantiles of eta*_1
    ReferenceCdf R(eta1());
    const int n = 20000;
    EmpiricalCdf F;
    for (int i = 0; i < n; ++i) {
        double u = (i + 0.5) / n, lo = 1.0, hi = 64.0;
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            (R(mid) < u ? lo : hi) = mid;
        }
        F.ys.push_back(0.5 * (lo + hi));
    }
    EXPECT_LT(ks_distance(F, eta1()), 1.0 / n + 1e-6);
}

TEST(Ks, TwoIndependentSamples)
{
    auto a = init_ensemble(100000, LengthSampler::parse("exp:1"), 100);
    auto b = init_ensemble(100000, LengthSampler::parse("exp:1"), 200);
    double d = ks_distance(empirical_rescaled(a), empirical_rescaled(b));
    EXPECT_GT(d, 0.0);
    EXPECT_LE(d, 0.01);
    auto F = empirical_rescaled(a);
    EXPECT_EQ(ks_distance(F, F), 0.0);
}

TEST(Ks, CdfTableColumns)
{
    auto e = init_ensemble(1000, LengthSampler::parse("uniform:1:2"), 8);
    auto rows = cdf_table(empirical_rescaled(e), eta1(), 4.0);
    ASSERT_EQ(rows.size(), 193u);
    EXPECT_EQ(rows.front().y, 1.0);
    EXPECT_EQ(rows.back().y, 4.0);
    for (const auto& r : rows) EXPECT_DOUBLE_EQ(r.diff, std::abs(r.emp - r.ref));
    auto bad = eta1();
    for (auto& v : bad.values) v *= 2.0;
    EXPECT_THROW(ReferenceCdf{bad}, ConfigError);
}
