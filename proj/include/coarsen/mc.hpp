#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "coarsen/error.hpp"
#include "coarsen/grid.hpp"
#include "coarsen/kernel.hpp"
#include "coarsen/rng.hpp"

namespace coarsen {

enum class Variant { mean_field, ring };

inline const char* variant_name(Variant v) { return v == Variant::ring ? "ring" : "mean-field"; }

inline Variant parse_variant(const std::string& s)
{
    if (s == "mean-field" || s == "mean_field") return Variant::mean_field;
    if (s == "ring") return Variant::ring;
    throw ConfigError("unknown variant: " + s);
}

/// Initial length law: "constant:c", "uniform:a:b" or "exp:rate" (1 plus an exponential).
struct LengthSampler {
    enum class Kind { constant, uniform, exponential };
    Kind kind = Kind::uniform;
    double a = 1.0, b = 2.0;

    static LengthSampler parse(const std::string& spec)
    {
        std::vector<std::string> f;
        std::stringstream ss(spec);
        for (std::string t; std::getline(ss, t, ':');) f.push_back(t);
        auto num = [&](std::size_t i) {
            try {
                return std::stod(f.at(i));
            } catch (const std::exception&) {
                throw ConfigError("bad sampler spec: " + spec);
            }
        };
        LengthSampler s;
        if (f.size() == 2 && f[0] == "constant") s = {Kind::constant, num(1), num(1)};
        else if (f.size() == 3 && f[0] == "uniform") s = {Kind::uniform, num(1), num(2)};
        else if (f.size() == 2 && f[0] == "exp") s = {Kind::exponential, num(1), 0.0};
        else throw ConfigError("bad sampler spec: " + spec);
        s.validate();
        return s;
    }

    /// Smallest value the sampler can emit.
    double lower() const { return kind == Kind::exponential ? 1.0 : a; }

    void validate() const
    {
        if (kind == Kind::exponential && !(a > 0.0)) throw ConfigError("sampler: rate must be positive");
        if (kind == Kind::uniform && !(b > a)) throw ConfigError("sampler: need a < b");
        if (!(lower() >= 1.0)) throw ConfigError("sampler can emit lengths below 1");
    }

    double draw(CounterRng& rng) const
    {
        switch (kind) {
        case Kind::constant: return a;
        case Kind::uniform: return a + (b - a) * rng.uniform();
        case Kind::exponential: return 1.0 - std::log1p(-rng.uniform()) / a;
        }
        return a;
    }

    std::string describe() const
    {
        std::ostringstream os;
        os << std::setprecision(17);
        if (kind == Kind::constant) os << "constant:" << a;
        else if (kind == Kind::uniform) os << "uniform:" << a << ':' << b;
        else os << "exp:" << a;
        return os.str();
    }
};

struct McEvent {
    double minimum;
    int partners;
    double merged;
};

struct RunReport {
    std::uint64_t events = 0;
    bool early_stop = false;
    double cutoff = 1.0;
};

/**
 * @brief Interval lengths of the coarsening process with event-driven merging.
 *
 * The minimum is found by a bucket queue over [base, 17 base) with width
 * base/1024 and lazy deletion; buckets are sorted when the cursor reaches
 * them, and everything is re-bucketed when the cutoff doubles. Partners are
 * drawn from a flat array with swap-remove (mean field) or taken from the
 * circular neighbour links (ring).
 */
class McEnsemble {
public:
    static constexpr std::size_t default_floor = 100;
    static constexpr std::size_t buckets_per_base = 1024;
    static constexpr std::size_t bucket_count = 16 * buckets_per_base;

    McEnsemble(std::vector<double> lengths, std::uint64_t seed, Variant variant = Variant::mean_field)
        : rng_(seed), variant_(variant)
    {
        if (lengths.empty()) throw ConfigError("mc: empty ensemble");
        const auto n = std::uint32_t(lengths.size());
        items_.reserve(lengths.size());
        for (std::uint32_t i = 0; i < n; ++i) {
            if (!(lengths[i] >= 1.0)) throw ConfigError("mc: lengths must be >= 1");
            items_.push_back({lengths[i], i, (i + n - 1) % n, (i + 1) % n, true});
            flat_.push_back(i);
        }
        rebuild(1.0);
    }

    std::size_t size() const { return flat_.size(); }
    double cutoff() const { return cutoff_; }
    std::uint64_t events() const { return events_; }
    std::uint64_t partners_removed() const { return partners_removed_; }
    Variant variant() const { return variant_; }
    const CounterRng& rng() const { return rng_; }

    /// Smallest population an event may leave behind.
    void set_population_floor(std::size_t n) { floor_ = n; }
    std::size_t population_floor() const { return floor_; }

    void enable_log(bool on) { logging_ = on; }
    const std::vector<McEvent>& log() const { return log_; }

    /// Lengths in storage order.
    std::vector<double> lengths() const
    {
        std::vector<double> v;
        v.reserve(flat_.size());
        for (auto id : flat_) v.push_back(items_[id].len);
        return v;
    }

    /// Lengths in ring order starting from the current minimum.
    std::vector<double> ring_order()
    {
        if (variant_ != Variant::ring) throw ConfigError("mc: ring order needs the ring variant");
        std::vector<double> v;
        auto start = find_min(), id = start;
        do {
            v.push_back(items_[id].len);
            id = items_[id].next;
        } while (id != start);
        return v;
    }

    /// Neumaier sum of all lengths.
    double total_length() const
    {
        double s = 0.0, c = 0.0;
        for (auto id : flat_) add(s, c, items_[id].len);
        return s + c;
    }

    double min_length() { return items_[find_min()].len; }

    /**
     * @brief One merge event. Returns false, leaving the ensemble unchanged
     * except for consumed random numbers, when it would drop below the floor.
     */
    bool step(const Kernel& k)
    {
        const int j = draw_partners(k);
        if (flat_.size() < std::max<std::size_t>(floor_, 1) + std::size_t(j)) return false;
        const auto id = find_min();
        const double m = items_[id].len;
        double s = 0.0, c = 0.0;
        add(s, c, m);
        std::vector<std::uint32_t> group;
        group.reserve(std::size_t(j));
        std::uint32_t left = items_[id].prev, right = items_[id].next;
        if (variant_ == Variant::mean_field) {
            remove(id);
            for (int t = 0; t < j; ++t) {
                auto pid = flat_[rng_.below(flat_.size())];
                add(s, c, items_[pid].len);
                remove(pid);
            }
        } else {
            // alternate sides; an odd count starts on a random side
            bool start_right = j % 2 == 0 ? true : rng_.coin();
            for (int t = 0; t < j; ++t) {
                bool take_right = (t % 2 == 0) == start_right;
                std::uint32_t& cur = take_right ? right : left;
                group.push_back(cur);
                add(s, c, items_[cur].len);
                cur = take_right ? items_[cur].next : items_[cur].prev;
            }
            remove(id);
            for (auto g : group) remove(g);
        }
        const double merged = s + c;
        const auto nid = std::uint32_t(items_.size());
        items_.push_back({merged, std::uint32_t(flat_.size()), left, right, true});
        flat_.push_back(nid);
        if (flat_.size() == 1) {
            items_[nid].prev = items_[nid].next = nid;
        } else if (variant_ == Variant::ring) {
            items_[left].next = nid;
            items_[right].prev = nid;
        }
        cutoff_ = m;
        ++events_;
        partners_removed_ += std::uint64_t(j);
        if (logging_) log_.push_back({m, j, merged});
        if (m >= 2.0 * base_) rebuild(m);
        else insert(nid);
        return true;
    }

    /// Merge until the minimum reaches target; the cutoff is then set to target.
    RunReport run_until(const Kernel& k, double target)
    {
        if (!(target > cutoff_)) throw ConfigError("mc: target cutoff must exceed the current cutoff");
        RunReport r;
        const auto e0 = events_;
        while (true) {
            if (flat_.size() < floor_) {
                r.early_stop = true;
                break;
            }
            if (min_length() >= target) break;
            if (!step(k)) {
                r.early_stop = true;
                break;
            }
        }
        if (!r.early_stop) cutoff_ = target;
        r.events = events_ - e0;
        r.cutoff = cutoff_;
        return r;
    }

private:
    struct Item {
        double len;
        std::uint32_t flat;
        std::uint32_t prev, next;
        bool alive;
    };

    static void add(double& s, double& c, double x)
    {
        double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }

    int draw_partners(const Kernel& k)
    {
        const auto& p = k.weights();
        double u = rng_.uniform(), acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) return int(i) + 1;
        }
        for (std::size_t i = p.size(); i-- > 0;)
            if (p[i] > 0.0) return int(i) + 1;
        return 1;
    }

    // buckets are sorted by decreasing (len, id) so the minimum sits at the back
    bool later(std::uint32_t a, std::uint32_t b) const
    {
        const auto &x = items_[a], &y = items_[b];
        return x.len > y.len || (x.len == y.len && a > b);
    }

    std::size_t bucket_of(double len) const
    {
        double r = (len - base_) / width_;
        if (!(r < double(bucket_count))) return bucket_count;
        return std::max(cursor_, std::size_t(std::max(r, 0.0)));
    }

    void insert(std::uint32_t id)
    {
        auto b = bucket_of(items_[id].len);
        if (b == bucket_count) {
            overflow_.push_back(id);
            return;
        }
        auto& B = buckets_[b];
        if (b == cursor_ && sorted_) {
            auto pos = std::upper_bound(B.begin(), B.end(), id, [&](std::uint32_t a, std::uint32_t c) { return later(a, c); });
            B.insert(pos, id);
        } else {
            B.push_back(id);
        }
    }

    void remove(std::uint32_t id)
    {
        auto& it = items_[id];
        it.alive = false;
        auto last = flat_.back();
        flat_[it.flat] = last;
        items_[last].flat = it.flat;
        flat_.pop_back();
    }

    void rebuild(double base)
    {
        base_ = base;
        width_ = base / double(buckets_per_base);
        buckets_.assign(bucket_count, {});
        overflow_.clear();
        cursor_ = 0;
        sorted_ = false;
        for (auto id : flat_) insert(id);
    }

    std::uint32_t find_min()
    {
        while (true) {
            if (cursor_ == bucket_count) {
                if (flat_.empty()) throw NumericalError("mc: ensemble is empty");
                double m = std::numeric_limits<double>::infinity();
                for (auto id : flat_) m = std::min(m, items_[id].len);
                rebuild(m);
                continue;
            }
            auto& B = buckets_[cursor_];
            if (!sorted_) {
                B.erase(std::remove_if(B.begin(), B.end(), [&](std::uint32_t id) { return !items_[id].alive; }), B.end());
                std::sort(B.begin(), B.end(), [&](std::uint32_t a, std::uint32_t b) { return later(a, b); });
                sorted_ = true;
            }
            while (!B.empty() && !items_[B.back()].alive) B.pop_back();
            if (!B.empty()) return B.back();
            ++cursor_;
            sorted_ = false;
        }
    }

    CounterRng rng_;
    Variant variant_;
    std::vector<Item> items_;
    std::vector<std::uint32_t> flat_;
    std::vector<std::vector<std::uint32_t>> buckets_;
    std::vector<std::uint32_t> overflow_;
    double base_ = 1.0, width_ = 1.0 / 1024;
    std::size_t cursor_ = 0;
    bool sorted_ = false;
    double cutoff_ = 1.0;
    std::uint64_t events_ = 0, partners_removed_ = 0;
    std::size_t floor_ = default_floor;
    bool logging_ = false;
    std::vector<McEvent> log_;
};

/// count i.i.d. lengths from the sampler; the stream seeds the merge events as well.
inline McEnsemble init_ensemble(std::size_t count, const LengthSampler& sampler, std::uint64_t seed, Variant variant = Variant::mean_field)
{
    if (count < 10) throw ConfigError("mc: need at least 10 intervals");
    sampler.validate();
    // lengths use a separate stream so that the event stream starts at counter 0
    CounterRng draw(CounterRng::mix(seed ^ 0x6C656E67746873ULL));
    std::vector<double> v(count);
    for (auto& x : v) x = sampler.draw(draw);
    return McEnsemble(std::move(v), seed, variant);
}

/// Sorted samples y = x / L.
struct EmpiricalCdf {
    std::vector<double> ys;

    double operator()(double y) const
    {
        return ys.empty() ? 0.0 : double(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin()) / double(ys.size());
    }
};

inline EmpiricalCdf empirical_rescaled(const McEnsemble& ens)
{
    if (ens.size() == 0) throw ConfigError("mc: empty ensemble");
    EmpiricalCdf F{ens.lengths()};
    for (double& y : F.ys) y /= ens.cutoff();
    std::sort(F.ys.begin(), F.ys.end());
    return F;
}

/// Cumulative trapezoid integral of a density, read off by linear interpolation.
class ReferenceCdf {
public:
    explicit ReferenceCdf(const GridDensity& ref) : g_(ref), C_(ref.size(), 0.0)
    {
        for (std::size_t i = 1; i < ref.size(); ++i) C_[i] = C_[i - 1] + 0.5 * ref.h * (ref.values[i - 1] + ref.values[i]);
        if (std::abs(C_.back() - 1.0) > 1e-3) throw ConfigError("ks_distance: reference must have mass 1");
    }

    double operator()(double y) const
    {
        if (y <= g_.y0) return 0.0;
        double r = (y - g_.y0) / g_.h;
        if (r >= double(C_.size() - 1)) return C_.back();
        auto i = std::size_t(r);
        double t = r - double(i);
        return (1.0 - t) * C_[i] + t * C_[i + 1];
    }

private:
    GridDensity g_;
    std::vector<double> C_;
};

/// sup |F_emp - F_ref| over the sample points, using both one-sided limits of the step function.
inline double ks_distance(const EmpiricalCdf& F, const GridDensity& ref)
{
    ReferenceCdf R(ref);
    const double n = double(F.ys.size());
    double d = 0.0;
    for (std::size_t i = 0; i < F.ys.size(); ++i) {
        double r = R(F.ys[i]);
        d = std::max({d, std::abs(double(i + 1) / n - r), std::abs(double(i) / n - r)});
    }
    return d;
}

/// Two-sample statistic sup |F - G|.
inline double ks_distance(const EmpiricalCdf& F, const EmpiricalCdf& G)
{
    const auto &a = F.ys, &b = G.ys;
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double y = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= y) ++i;
        while (j < b.size() && b[j] <= y) ++j;
        d = std::max(d, std::abs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    return d;
}

struct CdfRow {
    double y, emp, ref, diff;
};

/// Both CDFs on the nodes of the reference grid up to y_top.
inline std::vector<CdfRow> cdf_table(const EmpiricalCdf& F, const GridDensity& ref, double y_top)
{
    ReferenceCdf R(ref);
    std::vector<CdfRow> rows;
    for (std::size_t i = 0; i < ref.size() && ref.y(i) <= y_top; ++i) {
        double y = ref.y(i), e = F(y), r = R(y);
        rows.push_back({y, e, r, std::abs(e - r)});
    }
    return rows;
}

} // namespace coarsen
