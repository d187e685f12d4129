#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "coarsen/error.hpp"

namespace coarsen {

/**
 * @brief Quadrature weight of the m-th node after a support start.
 *
 * Integrates the cubic interpolant used by the Fourier transform exactly
 * (left end-correction of the trapezoid rule), so that mass and the
 * transform at xi = 0 agree.
 */
inline double start_weight(std::ptrdiff_t m)
{
    static constexpr double w[4] = {1.0 / 3.0, 31.0 / 24.0, 5.0 / 6.0, 25.0 / 24.0};
    return m >= 0 && m < 4 ? w[m] : 1.0;
}

/** @brief Density sampled at y_i = y0 + i h, zero below support_min. */
struct GridDensity {
    double h = 1.0 / 64.0;
    std::vector<double> values;
    double support_min = 1.0;
    double y0 = 1.0;

    GridDensity() = default;
    GridDensity(double h_, std::vector<double> v, double support = 1.0, double y0_ = 1.0)
        : h(h_), values(std::move(v)), support_min(support), y0(y0_)
    {
    }

    std::size_t size() const { return values.size(); }
    double y(std::size_t i) const { return y0 + double(i) * h; }
    double y_max() const { return y(values.size() - 1); }
    double operator[](std::size_t i) const { return values[i]; }

    /// Index of the first node at or above support_min.
    std::size_t support_index() const
    {
        double r = (support_min - y0) / h;
        return r <= 0.0 ? 0 : std::size_t(std::ceil(r - 1e-9));
    }

    double weight(std::size_t i) const
    {
        auto s = support_index();
        return i < s ? 0.0 : h * start_weight(std::ptrdiff_t(i - s));
    }

    /// int y^p eta(y) dy over the grid.
    double moment(double p = 0.0) const
    {
        double s = 0.0, c = 0.0;
        for (std::size_t i = support_index(); i < values.size(); ++i) {
            double t = weight(i) * (p == 0.0 ? values[i] : std::pow(y(i), p) * values[i]);
            // Neumaier summation
            double u = s + t;
            c += std::abs(s) >= std::abs(t) ? (s - u) + t : (t - u) + s;
            s = u;
        }
        return s + c;
    }

    double mass() const { return moment(0.0); }

    double min_value() const { return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end()); }

    /// Value by local cubic Lagrange interpolation (stencil kept inside the support), 0 outside.
    double at(double yy) const;
};

enum class Interp { cubic, pchip, linear };

/**
 * @brief Interpolated value of g at y; 0 below support_min and above y_max.
 *
 * Stencils never cross the support start, so a jump there is not smeared.
 * pchip (Fritsch-Carlson) and linear preserve nonnegativity.
 */
inline double interpolate(const GridDensity& g, double yy, Interp mode = Interp::cubic)
{
    const auto n = std::ptrdiff_t(g.size());
    if (n == 0 || yy < g.support_min - 1e-12 * g.h || yy > g.y_max()) return 0.0;
    const auto lo = std::ptrdiff_t(g.support_index());
    if (lo >= n) return 0.0;
    double r = (yy - g.y0) / g.h;
    auto i = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(std::floor(r)), lo, n - 1);
    double t = r - double(i);
    if (i == n - 1 || t <= 0.0) return g.values[i];
    const auto& v = g.values;
    if (mode == Interp::linear || n - lo < 3) return (1.0 - t) * v[i] + t * v[i + 1];
    if (mode == Interp::cubic) {
        std::ptrdiff_t b = std::clamp<std::ptrdiff_t>(i - 1, lo, std::max(lo, n - 4));
        std::ptrdiff_t m = std::min<std::ptrdiff_t>(4, n - lo);
        double x = r - double(b), out = 0.0;
        for (std::ptrdiff_t a = 0; a < m; ++a) {
            double l = 1.0;
            for (std::ptrdiff_t c = 0; c < m; ++c)
                if (c != a) l *= (x - double(c)) / double(a - c);
            out += l * v[b + a];
        }
        return out;
    }
    // pchip
    auto secant = [&](std::ptrdiff_t k) { return v[k + 1] - v[k]; };  // per cell, h = 1 units
    auto slope = [&](std::ptrdiff_t k) {
        if (k == lo || k == n - 1) {
            bool left = k == lo;
            double d0 = left ? secant(k) : secant(k - 1);
            double d1 = left ? secant(k + 1) : secant(k - 2);
            double d = (3.0 * d0 - d1) / 2.0;
            if (d * d0 <= 0.0) return 0.0;
            if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0)) return 3.0 * d0;
            return d;
        }
        double a = secant(k - 1), b = secant(k);
        if (a * b <= 0.0) return 0.0;
        return 2.0 * a * b / (a + b);
    };
    double m0 = slope(i), m1 = slope(i + 1);
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * v[i] + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * v[i + 1] + (t3 - t2) * m1;
}

inline double GridDensity::at(double yy) const { return interpolate(*this, yy, Interp::cubic); }

/// Sample f on [y0, y_max] with step h.
inline GridDensity sample(double h, double y_max, const std::function<double(double)>& f, double y0 = 1.0)
{
    detail::require(h > 0.0 && y_max > y0, "sample: invalid grid");
    auto M = std::size_t(std::llround((y_max - y0) / h)) + 1;
    GridDensity g(h, std::vector<double>(M), y0, y0);
    for (std::size_t i = 0; i < M; ++i) g.values[i] = f(g.y(i));
    return g;
}

/**
 * @brief Uniform probability density on [a, b] (a, b on the grid).
 *
 * The node at the trailing jump carries the mean of the one-sided limits,
 * which makes the grid mass exactly 1.
 */
inline GridDensity uniform_density(double h, double y_max, double a = 1.0, double b = 2.0)
{
    detail::require(1.0 <= a && a < b && b <= y_max, "uniform_density: invalid interval");
    double tol = 1e-9 * h;
    auto g = sample(h, y_max, [&](double y) {
        if (y < a - tol || y > b + tol) return 0.0;
        return (y > b - tol ? 0.5 : 1.0) / (b - a);
    });
    g.support_min = a;
    return g;
}

/// Number of cells in a unit length; throws unless h divides 1.
inline std::size_t cells_per_unit(double h)
{
    double r = 1.0 / h;
    auto n = std::llround(r);
    if (n <= 0 || std::abs(r - double(n)) > 1e-9 * r) throw ConfigError("grid step must divide 1 exactly");
    return std::size_t(n);
}

// ---- serialization ----

/// CSV with '#'-prefixed header lines, then "y,value" rows at full precision.
inline void write_csv(std::ostream& os, const GridDensity& g, const std::vector<std::string>& header = {})
{
    for (const auto& line : header) os << "# " << line << '\n';
    os << "# h=" << std::setprecision(17) << g.h << " support_min=" << g.support_min << " y0=" << g.y0 << '\n';
    os << "y,value\n";
    for (std::size_t i = 0; i < g.size(); ++i) os << std::setprecision(17) << g.y(i) << ',' << g.values[i] << '\n';
}

inline GridDensity read_csv(std::istream& is)
{
    std::string line;
    std::vector<double> ys, vs;
    double support = std::numeric_limits<double>::quiet_NaN();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto p = line.find("support_min=");
            if (p != std::string::npos) support = std::stod(line.substr(p + 12));
            continue;
        }
        if (line.rfind("y,", 0) == 0) continue;
        auto c = line.find(',');
        if (c == std::string::npos) throw ConfigError("csv: malformed row: " + line);
        ys.push_back(std::stod(line.substr(0, c)));
        vs.push_back(std::stod(line.substr(c + 1)));
    }
    if (ys.size() < 2) throw ConfigError("csv: need at least two rows");
    double h = (ys.back() - ys.front()) / double(ys.size() - 1);
    for (std::size_t i = 1; i < ys.size(); ++i)
        if (std::abs(ys[i] - ys[i - 1] - h) > 1e-9 * std::max(1.0, h)) throw ConfigError("csv: grid is not uniform");
    GridDensity g(h, vs, ys.front(), ys.front());
    if (std::isnan(support)) {
        std::size_t i = 0;
        while (i < vs.size() && vs[i] == 0.0) ++i;
        support = g.y(std::min(i, vs.size() - 1));
    }
    g.support_min = support;
    return g;
}

inline constexpr char binary_magic[8] = {'C', 'O', 'A', 'R', 'S', 'G', 'D', '1'};

/// Binary snapshot: magic, h, M, support_min, y0, then M raw doubles (native byte order).
inline void write_binary(std::ostream& os, const GridDensity& g)
{
    std::uint64_t M = g.size();
    os.write(binary_magic, 8);
    os.write(reinterpret_cast<const char*>(&g.h), sizeof(double));
    os.write(reinterpret_cast<const char*>(&M), sizeof(M));
    os.write(reinterpret_cast<const char*>(&g.support_min), sizeof(double));
    os.write(reinterpret_cast<const char*>(&g.y0), sizeof(double));
    os.write(reinterpret_cast<const char*>(g.values.data()), std::streamsize(M * sizeof(double)));
    if (!os) throw Error("binary snapshot: write failed");
}

inline GridDensity read_binary(std::istream& is)
{
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, binary_magic, 8) != 0) throw ConfigError("binary snapshot: bad magic");
    GridDensity g;
    std::uint64_t M = 0;
    is.read(reinterpret_cast<char*>(&g.h), sizeof(double));
    is.read(reinterpret_cast<char*>(&M), sizeof(M));
    is.read(reinterpret_cast<char*>(&g.support_min), sizeof(double));
    is.read(reinterpret_cast<char*>(&g.y0), sizeof(double));
    if (!is || M > (std::uint64_t(1) << 34)) throw ConfigError("binary snapshot: truncated header");
    g.values.resize(M);
    is.read(reinterpret_cast<char*>(g.values.data()), std::streamsize(M * sizeof(double)));
    if (!is) throw ConfigError("binary snapshot: truncated payload");
    return g;
}

} // namespace coarsen
