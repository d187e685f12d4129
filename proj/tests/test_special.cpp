#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "coarsen/special.hpp"

using namespace coarsen;

TEST(Special, E1AtOneMatchesQuadrature)
{
    boost::math::quadrature::exp_sinh<double> es;
    double ref = es.integrate([](double y) { return std::exp(-y) / y; }, 1.0, std::numeric_limits<double>::infinity());
    EXPECT_NEAR(e1(1.0).real(), ref, 1e-10);
    EXPECT_NEAR(e1(1.0).imag(), 0.0, 1e-15);
}

TEST(Special, E1RealAxisAgainstQuadrature)
{
    boost::math::quadrature::exp_sinh<double> es;
    for (double x : {0.01, 0.3, 2.0, 3.9, 4.1, 7.5, 20.0}) {
        double ref = es.integrate([x](double y) { return std::exp(-x * y) / y; }, 1.0, std::numeric_limits<double>::infinity());
        EXPECT_NEAR(e1(x).real() / ref, 1.0, 1e-12) << x;
    }
}

TEST(Special, E1SmallImaginaryLimit)
{
    for (double xi : {1e-3, 1e-5, 1e-7}) {
        cplx z(0.0, xi);
        EXPECT_LT(std::abs(e1(z) + std::log(z) + euler_gamma), 2.0 * xi);
    }
}

TEST(Special, XAtHalfPi)
{
    EXPECT_NEAR(e1(cplx(0.0, pi / 2)).real(), -0.472, 1e-3);
    EXPECT_NEAR(x_of_xi(pi / 2), -0.472, 1e-3);
}

TEST(Special, WStarImaginaryAtPi)
{
    EXPECT_NEAR(w_star_hat(pi).imag(), 0.281, 1e-3);
    EXPECT_NEAR(y_of_xi(pi), -0.281, 1e-3);
}

TEST(Special, LaplaceCaseIsReal)
{
    for (double p : {0.1, 1.0, 5.0}) {
        cplx w = w_star_hat(cplx(0.0, -p));
        EXPECT_NEAR(w.imag(), 0.0, 1e-14);
        EXPECT_NEAR(w.real(), e1(p).real(), 1e-14);
    }
}

TEST(Special, DecaysDeepInLowerHalfPlane)
{
    double prev = 1e300;
    for (double x2 : {-1.0, -5.0, -20.0, -60.0}) {
        double bound = e1(-x2).real();
        for (double x1 : {-10.0, 0.0, 3.0, 40.0}) EXPECT_LE(std::abs(w_star_hat(cplx(x1, x2))), bound * (1 + 1e-12));
        EXPECT_LT(bound, prev);
        prev = bound;
    }
    EXPECT_LT(prev, 1e-20);
}

TEST(Special, DomainErrors)
{
    EXPECT_THROW(e1(0.0), DomainError);
    EXPECT_THROW(e1(-2.0), DomainError);
    EXPECT_THROW(w_star_hat(0.0), DomainError);
}

TEST(Special, ConjugateSymmetry)
{
    for (double xi : log_grid(1e-3, 1e2, 57)) EXPECT_LT(std::abs(w_star_hat(-xi) - std::conj(w_star_hat(xi))), 1e-14);
}

TEST(Special, YBoundedByHalfPi)
{
    for (double xi : log_grid(1e-4, 1e3, 400)) EXPECT_LT(std::abs(y_of_xi(xi)), pi / 2);
}

TEST(Special, BoundsBeyondHalfPi)
{
    for (double xi : log_grid(pi / 2, 1e3, 2000)) {
        EXPECT_LE(std::abs(x_of_xi(xi)), 0.472 + 1e-3);
        EXPECT_LE(std::abs(y_of_xi(xi)), 0.281 + 1e-3);
    }
}

TEST(Special, RealPartBoundedBelowInLowerHalfPlane)
{
    for (double x1 : {-30.0, -3.0, -1.0, 0.5, 1.5707, 2.0, 9.0})
        for (double x2 : {0.0, -0.01, -0.3, -2.0})
            if (x1 != 0.0 || x2 != 0.0) {
                EXPECT_GE(w_star_hat(cplx(x1, x2)).real(), -0.473);
            }
}

TEST(Special, BranchesAgreeOnOverlap)
{
    // continued fraction forced by evaluating just outside |z| = 4 and comparing with the series
    for (double r : {3.5, 3.8, 4.2, 4.5}) {
        for (double a : {0.0, 0.5, 1.2, 1.5707963, 2.5, -1.0}) {
            cplx z = std::polar(r, a);
            cplx series = -std::log(z) - euler_gamma + ein_series(z);
            EXPECT_LT(std::abs(series - e1(z)) / std::abs(e1(z)), 1e-10) << r << " " << a;
        }
    }
}

TEST(Special, KLimitAtZero)
{
    EXPECT_NEAR(K_of_xi(1e-6), std::log(2.0) - euler_gamma, 1e-5);
}

TEST(Special, MarginPositiveAtThetaOne)
{
    auto g = log_grid(1e-3, 100.0, 2000);
    auto r = appendix_a_margin(1.0, g);
    EXPECT_GT(r.margin, 0.0);
    EXPECT_GT(r.K_min, 0.0);
}

TEST(Special, MarginLargerForSmallerTheta)
{
    auto g = log_grid(1e-3, 100.0, 500);
    for (double xi : g) {
        cplx w = w_star_hat(xi);
        double m1 = 1.0 - std::abs(1.0 - std::exp(-w));
        double mh = 1.0 - std::abs(1.0 - std::exp(-0.5 * w));
        EXPECT_GE(mh, m1 - 1e-14);
    }
}
