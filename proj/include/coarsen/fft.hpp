#pragma once

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "coarsen/error.hpp"

namespace coarsen {

/**
 * @brief Complex 1-D FFT of a fixed length, backed by FFTW.
 *
 * Plans use FFTW_ESTIMATE so that the chosen algorithm (and hence every output
 * bit) does not depend on machine timing. Not thread-safe; use one per thread.
 */
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n)
    {
        detail::require(n > 0, "fft: length must be positive");
        buf_ = fftw_alloc_complex(n);
        if (!buf_) throw std::bad_alloc();
        std::lock_guard lock(plan_mutex());
        fwd_ = fftw_plan_dft_1d(int(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(int(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;
    ~Fft()
    {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }

    std::size_t size() const { return n_; }

    /// X_k = sum_n x_n e^{-2 pi i nk/L}, in place.
    void forward(std::vector<std::complex<double>>& x) { run(x, fwd_, 1.0); }

    /// x_n = (1/L) sum_k X_k e^{2 pi i nk/L}, in place.
    void inverse(std::vector<std::complex<double>>& x) { run(x, bwd_, 1.0 / double(n_)); }

    /// Zero-padded forward transform of a real sequence.
    std::vector<std::complex<double>> forward_real(const double* v, std::size_t m)
    {
        if (m > n_) throw GridOverflow("fft: input longer than transform length");
        std::vector<std::complex<double>> x(n_, 0.0);
        for (std::size_t i = 0; i < m; ++i) x[i] = v[i];
        forward(x);
        return x;
    }

    /// Shared instance per length (the cache lives for the whole process).
    static Fft& cached(std::size_t n)
    {
        static std::map<std::size_t, std::unique_ptr<Fft>> cache;
        auto& slot = cache[n];
        if (!slot) slot = std::make_unique<Fft>(n);
        return *slot;
    }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;

    static std::mutex& plan_mutex()
    {
        static std::mutex m;
        return m;
    }

    void run(std::vector<std::complex<double>>& x, fftw_plan p, double scale)
    {
        if (x.size() != n_) throw ConfigError("fft: length mismatch");
        std::memcpy(static_cast<void*>(buf_), static_cast<const void*>(x.data()), n_ * sizeof(fftw_complex));
        fftw_execute(p);
        std::memcpy(static_cast<void*>(x.data()), static_cast<const void*>(buf_), n_ * sizeof(fftw_complex));
        if (scale != 1.0)
            for (auto& c : x) c *= scale;
    }
};

/// Smallest power of two >= n.
inline std::size_t next_pow2(std::size_t n)
{
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/**
 * @brief Linear convolution of two real sequences by zero-padded FFT.
 *
 * Returns the first out_len entries of a * b.
 */
inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b, std::size_t out_len)
{
    if (a.empty() || b.empty()) return std::vector<double>(out_len, 0.0);
    std::size_t L = next_pow2(a.size() + b.size() - 1);
    auto& f = Fft::cached(L);
    auto A = f.forward_real(a.data(), a.size());
    auto B = f.forward_real(b.data(), b.size());
    for (std::size_t k = 0; k < L; ++k) A[k] *= B[k];
    f.inverse(A);
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < std::min(out_len, L); ++i) out[i] = A[i].real();
    return out;
}

} // namespace coarsen
