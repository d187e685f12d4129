// coarsen: command-line front end for the coarsening solvers and simulator.
//
//   coarsen steady    [--theta 0.5,1,2,3.5]
//   coarsen evolve    [--init uniform|steady:THETA|FILE.csv] [--tau-end T] [--dtau D] [--gamma G,...] [--emit csv|binary] [--snapshots STRIDE]
//   coarsen transform [--init ...] [--theta THETA]
//   coarsen mc        [--count N] [--seed S] [--variant mean-field|ring] [--grow G] [--lengths uniform:1:2] [--emit-cdf FILE.csv]
//   coarsen verify    [--criteria 1,4,9] [--report FILE.json]
//
// Common: --kernel p1,p2,... (weights of z, z^2, ...), --grid-h, --y-max, --out-dir, --config FILE.
// Exit codes: 0 ok, 2 config error, 3 numeric or domain error, 4 acceptance failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coarsen/acceptance.hpp"
#include "coarsen/error.hpp"
#include "coarsen/evolve.hpp"
#include "coarsen/linearize.hpp"
#include "coarsen/mc.hpp"
#include "coarsen/profiles.hpp"
#include "coarsen/rng.hpp"

namespace fs = std::filesystem;
using namespace coarsen;

namespace {

constexpr const char* version = "coarsen 1.0.0";

enum Exit { ok = 0, config_error = 2, numeric_error = 3, acceptance_failure = 4 };

struct Common {
    std::vector<double> kernel{0.0, 1.0};
    double h = 1.0 / 64;
    double y_max = 64.0;
    std::string out_dir;
    std::uint64_t seed = 1;
};

struct Context {
    CLI::App* app = nullptr;  ///< the subcommand that runs
    const Common* common = nullptr;
    std::string argv_line;
};

std::string fmt(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::string join(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

/// Header lines: version, the command line, the resolved config, kernel constants, grid and seed.
std::vector<std::string> header(const Context& ctx, const Kernel& k, bool with_seed)
{
    std::vector<std::string> h{version, "argv: " + ctx.argv_line};
    std::istringstream cfg(ctx.app->config_to_str(true, false));
    for (std::string line; std::getline(cfg, line);)
        if (!line.empty()) h.push_back("config: " + ctx.app->get_name() + "." + line);
    h.push_back("kernel: weights=" + join(k.weights()) + " q=" + fmt(k.q()) + " kappa=" + fmt(k.kappa()) + " R=" + fmt(k.radius_R()) + " n_min=" + std::to_string(k.n_min()) + " lambda=" + fmt(k.lambda_decay()) + " theta_star=" + fmt(k.theta_star()));
    h.push_back("grid: h=" + fmt(ctx.common->h) + " y_max=" + fmt(ctx.common->y_max));
    if (with_seed) h.push_back("seed: " + std::to_string(ctx.common->seed) + " rng=" + CounterRng::algorithm);
    else h.push_back("seed: none");
    return h;
}

fs::path out_path(const Common& c, const std::string& name)
{
    fs::path dir = c.out_dir.empty() ? fs::path(".") : fs::path(c.out_dir);
    fs::create_directories(dir);
    return dir / name;
}

std::ofstream open_out(const fs::path& p)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + p.string() + " for writing");
    return os;
}

void write_header(std::ostream& os, const std::vector<std::string>& lines)
{
    for (const auto& l : lines) os << "# " << l << '\n';
}

GridDensity load_init(const Kernel& k, const std::string& init, double h, double y_max)
{
    if (init == "uniform") return uniform_density(h, y_max);
    if (init.rfind("steady:", 0) == 0) {
        double theta = 0.0;
        try {
            theta = std::stod(init.substr(7));
        } catch (const std::exception&) {
            throw ConfigError("bad --init " + init);
        }
        return steady_state_spectral(k, theta, GridSpec{h, y_max});
    }
    std::ifstream is(init);
    if (!is) throw ConfigError("--init: cannot read " + init);
    return read_csv(is);
}

// ---- steady ----

struct SteadyOpts {
    std::vector<double> thetas{0.5, 1.0, 2.0, 3.5};
};

int cmd_steady(const Context& ctx, const SteadyOpts& o)
{
    const Common& c = *ctx.common;
    Kernel k(c.kernel);
    const GridSpec spec{c.h, c.y_max};
    auto sum_os = open_out(out_path(c, "steady_summary.csv"));
    write_header(sum_os, header(ctx, k, false));
    sum_os << "theta,status,mass,moment,spectral_ode_sup,l1_abs,tail_constant,tail_measured\n";
    std::cout << std::setprecision(8);
    for (double theta : o.thetas) {
        if (!(theta > 0.0)) throw ConfigError("steady: theta must be positive");
        std::string status = theta <= 1.0 ? "in P" : theta <= k.theta_star() ? "not in P (signed)" : "not in P (theta > theta*)";
        std::optional<GridDensity> sp;
        if (theta <= 1.0) sp = steady_state_spectral(k, theta, spec);
        else if (theta <= k.theta_star()) {
            try {
                sp = generalized_profile_spectral(Kernel(c.kernel, 1024), theta, spec);
            } catch (const DomainError&) {
            }
        }
        // beyond theta* the profile grows, so the step control is relative to its size
        const double beta = theta / k.q();
        auto probe = steady_state_ode(k, beta, c.y_max, c.h, 1e300);
        double scale = 1.0;
        for (double v : probe.values) scale = std::max(scale, std::abs(v));
        auto ode = steady_state_ode(k, beta, c.y_max, c.h, 1e-7 * scale);

        double sup = std::numeric_limits<double>::quiet_NaN();
        if (sp) {
            sup = 0.0;
            for (std::size_t i = 0; i < ode.size() && ode.y(i) <= 12.0; ++i) sup = std::max(sup, std::abs(sp->values[i] - ode.values[i]));
        }
        const GridDensity& main = sp ? *sp : ode;
        GridDensity abs_g = main;
        for (double& v : abs_g.values) v = std::abs(v);
        double tail_c = std::numeric_limits<double>::quiet_NaN(), tail_m = tail_c;
        if (theta < 1.0) {
            tail_c = tail_constant(k, theta);
            double y = 0.5 * c.y_max;
            tail_m = std::pow(y, 1.0 + theta) * main.at(y);
        }

        std::ostringstream name;
        name << "steady_theta_" << theta << ".csv";
        auto os = open_out(out_path(c, name.str()));
        auto hd = header(ctx, k, false);
        hd.push_back("theta: " + fmt(theta) + " status: " + status);
        write_header(os, hd);
        os << "y,spectral,ode\n" << std::setprecision(17);
        for (std::size_t i = 0; i < ode.size(); ++i) {
            os << ode.y(i) << ',';
            if (sp) os << sp->values[i];
            else os << "nan";
            os << ',' << ode.values[i] << '\n';
        }
        sum_os << std::setprecision(17) << theta << ',' << status << ',' << main.mass() << ',' << main.moment(1.0) << ',' << sup << ',' << abs_g.mass() << ',' << tail_c << ',' << tail_m << '\n';
        std::cout << "theta=" << theta << "  " << status << "  mass=" << main.mass() << "  |eta|_1=" << abs_g.mass();
        if (sp) std::cout << "  spectral-vs-ode=" << sup;
        if (theta < 1.0) std::cout << "  tail constant=" << tail_c << " (y^(1+theta) eta at y=" << 0.5 * c.y_max << ": " << tail_m << ")";
        std::cout << '\n';
    }
    return ok;
}

// ---- evolve ----

struct EvolveOpts {
    std::string init = "uniform";
    double tau_end = 3.0;
    double dtau = std::log(2.0) / 32;
    std::vector<double> gammas{3.0};
    std::string emit = "csv";
    int snapshots = 0;
};

int cmd_evolve(const Context& ctx, const EvolveOpts& o)
{
    const Common& c = *ctx.common;
    if (o.emit != "csv" && o.emit != "binary") throw ConfigError("--emit must be csv or binary");
    if (o.snapshots < 0) throw ConfigError("--snapshots must be nonnegative");
    Kernel k(c.kernel);
    auto eta0 = load_init(k, o.init, c.h, c.y_max);
    IntegrateOptions opt;
    opt.dtau = o.dtau;
    opt.snapshot_stride = o.snapshots > 0 ? o.snapshots : std::numeric_limits<int>::max();
    for (double g : o.gammas) opt.norms.push_back({2, g - 1.0});
    opt.reference = steady_state_spectral(k, 1.0, GridSpec{eta0.h, eta0.y_max()});
    auto tr = integrate(k, eta0, o.tau_end, opt);

    auto hd = header(ctx, k, false);
    auto os = open_out(out_path(c, "evolve_trace.csv"));
    write_header(os, hd);
    os << "tau,mass,beta";
    for (double g : o.gammas) os << ",norm_2_" << g - 1.0;
    os << '\n' << std::setprecision(17);
    for (std::size_t n = 0; n < tr.taus.size(); ++n) {
        os << tr.taus[n] << ',' << tr.masses[n] << ',' << tr.beta_values[n];
        for (double v : tr.norms[n]) os << ',' << v;
        os << '\n';
    }
    if (o.snapshots > 0) {
        for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
            std::ostringstream name;
            name << "evolve_snapshot_" << std::setw(4) << std::setfill('0') << s << (o.emit == "csv" ? ".csv" : ".bin");
            auto so = open_out(out_path(c, name.str()));
            auto sh = hd;
            sh.push_back("tau: " + fmt(tr.snapshot_taus[s]));
            if (o.emit == "csv") write_csv(so, tr.snapshots[s], sh);
            else {
                // text header, then the binary snapshot starting at its magic
                write_header(so, sh);
                write_binary(so, tr.snapshots[s]);
            }
        }
    }
    std::cout << std::setprecision(8) << "tau=" << tr.taus.back() << "  mass=" << tr.masses.back() << "  beta=" << tr.beta_values.back() << "  steps=" << tr.taus.size() - 1 << "  snapshots=" << (o.snapshots > 0 ? tr.snapshots.size() : 0) << '\n';
    return ok;
}

// ---- transform ----

struct TransformOpts {
    std::string init = "uniform";
    double theta = 1.0;
};

int cmd_transform(const Context& ctx, const TransformOpts& o)
{
    const Common& c = *ctx.common;
    Kernel k(c.kernel);
    auto eta = load_init(k, o.init, c.h, c.y_max);
    Linearizer L(k, grid_of(eta));
    auto dec = L.forward(eta, o.theta);
    auto hd = header(ctx, k, false);
    hd.push_back("theta_over_q: " + fmt(dec.theta_over_q));
    hd.push_back("d0: " + fmt(dec.d0));
    auto os = open_out(out_path(c, "transform_d.csv"));
    write_header(os, hd);
    os << "y,d\n" << std::setprecision(17);
    for (std::size_t i = 0; i < dec.d.size(); ++i) os << dec.d.y(i) << ',' << dec.d.values[i] << '\n';
    std::cout << std::setprecision(10) << "theta/q=" << dec.theta_over_q << "  d0=" << dec.d0 << '\n';
    return ok;
}

// ---- mc ----

struct McOpts {
    std::size_t count = 200000;
    std::string variant = "mean-field";
    double grow = 8.0;
    std::string lengths = "uniform:1:2";
    std::string emit_cdf;
};

int cmd_mc(const Context& ctx, const McOpts& o)
{
    const Common& c = *ctx.common;
    Kernel k(c.kernel);
    auto sampler = LengthSampler::parse(o.lengths);
    auto variant = parse_variant(o.variant);
    if (!(o.grow > 1.0)) throw ConfigError("--grow must exceed 1");
    auto e = init_ensemble(o.count, sampler, c.seed, variant);
    const double L0 = e.total_length();
    auto rep = e.run_until(k, e.cutoff() * o.grow);
    auto F = empirical_rescaled(e);
    auto ref = steady_state_spectral(k, 1.0, GridSpec{c.h, c.y_max});
    double ks = ks_distance(F, ref);
    double drift = std::abs(e.total_length() - L0) / L0;

    auto hd = header(ctx, k, true);
    hd.push_back("events: " + std::to_string(rep.events) + " early_stop: " + (rep.early_stop ? "yes" : "no") + " cutoff: " + fmt(rep.cutoff) + " population: " + std::to_string(e.size()));
    hd.push_back("ks_to_steady: " + fmt(ks) + " relative_length_drift: " + fmt(drift));
    if (!o.emit_cdf.empty()) {
        fs::path p = fs::path(o.emit_cdf).is_absolute() ? fs::path(o.emit_cdf) : out_path(c, o.emit_cdf);
        auto os = open_out(p);
        write_header(os, hd);
        os << "y,F_emp,F_ref,diff\n" << std::setprecision(17);
        for (const auto& r : cdf_table(F, ref, std::min(16.0, ref.y_max()))) os << r.y << ',' << r.emp << ',' << r.ref << ',' << r.diff << '\n';
    }
    std::cout << std::setprecision(8) << "variant=" << variant_name(variant) << "  events=" << rep.events << "  population=" << e.size() << "  cutoff=" << rep.cutoff << (rep.early_stop ? " (early stop)" : "") << "  KS=" << ks << "  length drift=" << drift << '\n';
    return ok;
}

// ---- verify ----

struct VerifyOpts {
    std::vector<int> criteria;
    std::string report = "verify_report.json";
};

int cmd_verify(const Context& ctx, const VerifyOpts& o)
{
    const Common& c = *ctx.common;
    Kernel k(c.kernel);
    if (k.weights() != std::vector<double>{0.0, 1.0}) throw ConfigError("verify: the acceptance criteria are stated for Q = z^2 (--kernel 0,1)");
    std::set<int> only(o.criteria.begin(), o.criteria.end());
    for (int id : only)
        if (id < 1 || id > 15) throw ConfigError("verify: unknown criterion " + std::to_string(id));
    auto results = acceptance::run(only, [](const acceptance::Result& r) { std::cout << acceptance::format_line(r) << std::endl; });

    nlohmann::ordered_json j;
    j["header"] = header(ctx, k, false);
    j["criteria"] = nlohmann::ordered_json::array();
    bool all = true;
    for (const auto& r : results) {
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto& [name, v] : r.measured) m[name] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
        j["criteria"].push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"measured", m}, {"error", r.note}, {"seconds", r.seconds}});
        all = all && r.pass;
    }
    j["all_pass"] = all;
    fs::path p = fs::path(o.report).is_absolute() ? fs::path(o.report) : out_path(c, o.report);
    auto os = open_out(p);
    os << j.dump(2) << '\n';
    return all ? ok : acceptance_failure;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Coarsening solvers: steady profiles, evolution, linearization and Monte Carlo"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "key=value config file mirroring the flags");

    Common common;
    if (const char* env = std::getenv("COARSEN_OUT_DIR")) common.out_dir = env;
    auto add_common = [&](CLI::App* s, bool seed) {
        s->add_option("--kernel", common.kernel, "weights p1,p2,... of z, z^2, ...")->delimiter(',')->capture_default_str();
        s->add_option("--grid-h", common.h, "grid step (1/h integer)")->capture_default_str();
        s->add_option("--y-max", common.y_max, "right end of the grid")->capture_default_str();
        s->add_option("--out-dir", common.out_dir, "output directory (default $COARSEN_OUT_DIR or .)")->capture_default_str();
        if (seed) s->add_option("--seed", common.seed, "RNG seed")->capture_default_str();
    };

    SteadyOpts so;
    auto* steady = app.add_subcommand("steady", "self-similar profiles, spectral and ODE");
    add_common(steady, false);
    steady->add_option("--theta", so.thetas, "theta list")->delimiter(',')->capture_default_str();

    EvolveOpts eo;
    auto* evolve = app.add_subcommand("evolve", "direct integration of the rescaled equation");
    add_common(evolve, false);
    evolve->add_option("--init", eo.init, "uniform | steady:THETA | FILE.csv")->capture_default_str();
    evolve->add_option("--tau-end", eo.tau_end)->capture_default_str();
    evolve->add_option("--dtau", eo.dtau)->default_str(fmt(eo.dtau));
    evolve->add_option("--gamma", eo.gammas, "weights of the norms ||eta - eta*_1||_{2, gamma - 1}")->delimiter(',')->capture_default_str();
    evolve->add_option("--emit", eo.emit, "csv | binary snapshots")->capture_default_str();
    evolve->add_option("--snapshots", eo.snapshots, "snapshot stride in steps (0: none)")->capture_default_str();

    TransformOpts to;
    auto* transform = app.add_subcommand("transform", "counter-term decomposition of a density");
    add_common(transform, false);
    transform->add_option("--init", to.init, "uniform | steady:THETA | FILE.csv")->capture_default_str();
    transform->add_option("--theta", to.theta)->capture_default_str();

    McOpts mo;
    auto* mc = app.add_subcommand("mc", "Monte Carlo interval merging");
    add_common(mc, true);
    mc->add_option("--count", mo.count)->capture_default_str();
    mc->add_option("--variant", mo.variant, "mean-field | ring")->capture_default_str();
    mc->add_option("--grow", mo.grow, "target cutoff as a multiple of the initial one")->capture_default_str();
    mc->add_option("--lengths", mo.lengths, "constant:c | uniform:a:b | exp:rate")->capture_default_str();
    mc->add_option("--emit-cdf", mo.emit_cdf, "CSV with y, F_emp, F_ref, |diff|");

    VerifyOpts vo;
    auto* verify = app.add_subcommand("verify", "run the acceptance criteria, JSON report");
    add_common(verify, false);
    verify->add_option("--criteria", vo.criteria, "subset of criterion ids")->delimiter(',');
    verify->add_option("--report", vo.report)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    Context ctx{app.get_subcommands().front(), &common, {}};
    for (int i = 0; i < argc; ++i) ctx.argv_line += (i ? " " : "") + std::string(argv[i]);
    try {
        if (*steady) return cmd_steady(ctx, so);
        if (*evolve) return cmd_evolve(ctx, eo);
        if (*transform) return cmd_transform(ctx, to);
        if (*mc) return cmd_mc(ctx, mo);
        if (*verify) return cmd_verify(ctx, vo);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return numeric_error;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    }
    return config_error;
}
