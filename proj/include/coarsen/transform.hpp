#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "coarsen/fft.hpp"
#include "coarsen/grid.hpp"
#include "coarsen/special.hpp"

namespace coarsen {

/** @brief Samples of a Fourier transform on xi_k = k * xi_step, stored in FFT order. */
struct SpectralFunction {
    double xi_step = 0.0;
    std::vector<cplx> samples;

    std::size_t size() const { return samples.size(); }
    /// Signed frequency of slot k.
    double xi(std::size_t k) const
    {
        auto L = std::ptrdiff_t(samples.size());
        auto kk = std::ptrdiff_t(k);
        return xi_step * double(kk < (L + 1) / 2 ? kk : kk - L);
    }
    /// max |F(-xi) - conj F(xi)| over the grid.
    double symmetry_defect() const
    {
        double d = 0.0;
        std::size_t L = samples.size();
        // the Nyquist slot of an even length has no partner on the grid
        for (std::size_t k = 1; k < L; ++k)
            if (2 * k != L) d = std::max(d, std::abs(samples[L - k] - std::conj(samples[k])));
        return d;
    }
};

/// Attenuation factors W(t), alpha_0..3(t) of the cubic interpolant, t = -xi h.
struct Attenuation {
    double W;
    std::array<cplx, 4> a;
};

inline Attenuation attenuation(double t)
{
    const cplx I(0.0, 1.0);
    if (std::abs(t) < 0.08) {
        double u2 = t * t, u4 = u2 * u2, u6 = u4 * u2;
        Attenuation r;
        r.W = 1.0 - 11.0 / 720.0 * u4 + 23.0 / 15120.0 * u6;
        r.a[0] = (-2.0 / 3.0 + u2 / 45.0 + 103.0 / 15120.0 * u4 - 169.0 / 226800.0 * u6)
            + I * t * (2.0 / 45.0 + 2.0 / 105.0 * u2 - 8.0 / 2835.0 * u4 + 86.0 / 467775.0 * u6);
        r.a[1] = (7.0 / 24.0 - 7.0 / 180.0 * u2 + 5.0 / 3456.0 * u4 - 7.0 / 259200.0 * u6)
            + I * t * (7.0 / 72.0 - u2 / 168.0 + 11.0 / 72576.0 * u4 - 13.0 / 5987520.0 * u6);
        r.a[2] = (-1.0 / 6.0 + u2 / 45.0 - 5.0 / 6048.0 * u4 + u6 / 64800.0)
            + I * t * (-7.0 / 90.0 + u2 / 210.0 - 11.0 / 90720.0 * u4 + 13.0 / 7484400.0 * u6);
        r.a[3] = (1.0 / 24.0 - u2 / 180.0 + 5.0 / 24192.0 * u4 - u6 / 259200.0)
            + I * t * (7.0 / 360.0 - u2 / 840.0 + 11.0 / 362880.0 * u4 - 13.0 / 29937600.0 * u6);
        return r;
    }
    double c = std::cos(t), s = std::sin(t), c2 = std::cos(2 * t), s2 = std::sin(2 * t);
    double t2 = t * t, t3 = t2 * t, t4 = t2 * t2, b = 6.0 + t2;
    Attenuation r;
    double sh = std::sin(0.5 * t);
    r.W = (b / (3.0 * t4)) * 8.0 * sh * sh * sh * sh;  // 3 - 4 cos t + cos 2t = 8 sin^4(t/2)
    r.a[0] = cplx((-42.0 + 5.0 * t2) + b * (8.0 * c - c2), (-12.0 * t + 6.0 * t3) + b * s2) / (6.0 * t4);
    r.a[1] = cplx(14.0 * (3.0 - t2) - 7.0 * b * c, 30.0 * t - 5.0 * b * s) / (6.0 * t4);
    r.a[2] = cplx(-4.0 * (3.0 - t2) + 2.0 * b * c, -12.0 * t + 2.0 * b * s) / (3.0 * t4);
    r.a[3] = cplx(2.0 * (3.0 - t2) - b * c, 6.0 * t - b * s) / (6.0 * t4);
    return r;
}

/**
 * @brief Fourier transform pair for densities on [y0, y0 + L h) via cubic interpolation.
 *
 * forward: g^(xi) = int e^{-i xi y} g(y) dy of the cubic interpolant of the
 * samples (jump allowed at the support start), evaluated exactly at
 * xi_k = 2 pi k / (L h) with one FFT plus attenuation factors.
 * inverse: recovers the samples from such a spectrum (exact inverse of forward).
 */
class CubicTransform {
public:
    CubicTransform(double h, std::size_t L) : h_(h), L_(L), fft_(Fft::cached(L))
    {
        detail::require(L >= 8, "transform: length too small");
        att_.reserve(L);
        for (std::size_t k = 0; k < L; ++k) att_.push_back(attenuation(-xi(k) * h));
        // C_j[i] = (1/L) sum_k (alpha_j/W)_k e^{2 pi i ik/L}, i, j < 4
        Eigen::Matrix4cd A = Eigen::Matrix4cd::Identity();
        std::vector<cplx> c(L);
        for (int j = 0; j < 4; ++j) {
            for (std::size_t k = 0; k < L; ++k) c[k] = att_[k].a[j] / att_[k].W;
            fft_.inverse(c);
            for (int i = 0; i < 4; ++i) A(i, j) += c[i];
        }
        lu_ = A.partialPivLu();
    }

    double h() const { return h_; }
    std::size_t length() const { return L_; }
    double xi_step() const { return 2.0 * pi / (double(L_) * h_); }
    double xi(std::size_t k) const
    {
        auto kk = std::ptrdiff_t(k), L = std::ptrdiff_t(L_);
        return xi_step() * double(kk < (L + 1) / 2 ? kk : kk - L);
    }

    /// Transform of a grid density (support start at any node).
    SpectralFunction forward(const GridDensity& g) const
    {
        if (std::abs(g.h - h_) > 1e-15 * h_) throw ConfigError("transform: grid step mismatch");
        if (g.size() > L_) throw GridOverflow("transform: density longer than transform length");
        auto F = fft_.forward_real(g.values.data(), g.size());
        std::size_t s = g.support_index();
        double ys = g.y(s);
        SpectralFunction out{xi_step(), std::vector<cplx>(L_)};
        for (std::size_t k = 0; k < L_; ++k) {
            const auto& at = att_[k];
            double x = xi(k);
            cplx corr = 0.0;
            for (int j = 0; j < 4; ++j)
                if (s + j < g.size()) corr += at.a[j] * g.values[s + j];
            out.samples[k] = h_ * (std::polar(1.0, -x * g.y0) * at.W * F[k] + std::polar(1.0, -x * ys) * corr);
        }
        return out;
    }

    /// Samples on y_i = y0 + i h, i < L, of the cubic interpolant with spectrum S.
    std::vector<double> inverse(const SpectralFunction& S, double y0 = 1.0) const
    {
        if (S.size() != L_) throw ConfigError("transform: spectrum length mismatch");
        std::vector<cplx> G(L_), base(L_);
        for (std::size_t k = 0; k < L_; ++k) {
            G[k] = S.samples[k] * std::polar(1.0, xi(k) * y0) / h_;
            base[k] = G[k] / att_[k].W;
        }
        fft_.inverse(base);
        Eigen::Vector4cd rhs(base[0], base[1], base[2], base[3]);
        Eigen::Vector4cd v = lu_.solve(rhs);
        for (std::size_t k = 0; k < L_; ++k) {
            cplx c = 0.0;
            for (int j = 0; j < 4; ++j) c += v[j] * att_[k].a[j];
            G[k] = (G[k] - c) / att_[k].W;
        }
        fft_.inverse(G);
        std::vector<double> out(L_);
        for (std::size_t i = 0; i < L_; ++i) out[i] = G[i].real();
        return out;
    }

private:
    double h_;
    std::size_t L_;
    Fft& fft_;
    std::vector<Attenuation> att_;
    Eigen::PartialPivLU<Eigen::Matrix4cd> lu_;
};

} // namespace coarsen
