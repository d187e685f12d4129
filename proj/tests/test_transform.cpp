#include <gtest/gtest.h>

#include "coarsen/fft.hpp"
#include "coarsen/transform.hpp"

using namespace coarsen;

namespace {
const double h = 1.0 / 64;
const std::size_t L = 4 * 64 * 64;

GridDensity expo() { return sample(h, 1.0 + (L - 1) * h, [](double y) { return std::exp(-(y - 1.0)); }); }
} // namespace

TEST(Transform, ConvolveMatchesDirect)
{
    std::vector<double> a{1, 2, 3}, b{0.5, -1, 4, 2};
    auto c = convolve(a, b, 6);
    std::vector<double> ref{0.5, 0, 3.5, 7, 16, 6};
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(c[i], ref[i], 1e-13);
}

TEST(Transform, AttenuationSeriesMatchesClosedForm)
{
    for (double sgn : {1.0, -1.0}) {
        auto a = attenuation(sgn * 0.0799999999), b = attenuation(sgn * 0.0800000001);
        EXPECT_NEAR(a.W, b.W, 5e-13);
        for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(a.a[j] - b.a[j]), 5e-11);
    }
}

TEST(Transform, ForwardOfExponential)
{
    CubicTransform T(h, L);
    auto S = T.forward(expo());
    double err = 0;
    for (std::size_t k = 0; k < L; ++k) {
        double x = T.xi(k);
        cplx ex = std::polar(1.0, -x) / cplx(1.0, x);
        err = std::max(err, std::abs(S.samples[k] - ex));
    }
    EXPECT_LT(err, 2e-9);
    EXPECT_LT(S.symmetry_defect(), 1e-12);
}

TEST(Transform, InverseOfExactSpectrum)
{
    CubicTransform T(h, L);
    SpectralFunction S{T.xi_step(), std::vector<cplx>(L)};
    for (std::size_t k = 0; k < L; ++k) {
        double x = T.xi(k);
        S.samples[k] = std::polar(1.0, -x) / cplx(1.0, x);
    }
    auto v = T.inverse(S);
    auto e = expo();
    double err = 0;
    for (std::size_t i = 0; i < 2000; ++i) err = std::max(err, std::abs(v[i] - e.values[i]));
    EXPECT_LT(err, 1e-8);
}

TEST(Transform, RoundTrip)
{
    CubicTransform T(h, L);
    auto g = sample(h, 20.0, [](double y) { return y < 2 ? 1.0 : (y < 3 ? 3 - y : 0.0); });
    auto v = T.inverse(T.forward(g));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(v[i], g.values[i], 1e-13);
}

TEST(Transform, MassIsZeroFrequency)
{
    CubicTransform T(h, L);
    auto g = expo();
    g.values.resize(3000);
    EXPECT_NEAR(T.forward(g).samples[0].real(), g.mass(), 1e-14);
}

TEST(Transform, ShiftedSupportStart)
{
    CubicTransform T(h, L);
    auto g = sample(h, 60.0, [](double y) { return y >= 3.0 ? std::exp(-(y - 3.0)) : 0.0; });
    g.support_min = 3.0;
    auto S = T.forward(g);
    double err = 0;
    for (std::size_t k = 0; k < L; ++k) {
        double x = T.xi(k);
        err = std::max(err, std::abs(S.samples[k] - std::polar(1.0, -3.0 * x) / cplx(1.0, x)));
    }
    EXPECT_LT(err, 2e-9);
}
