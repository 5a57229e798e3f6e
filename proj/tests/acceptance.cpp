// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "dce/chebyshev.hpp"
#include "dce/engine.hpp"
#include "dce/exposure.hpp"
#include "dce/moments.hpp"
#include "dce/parallel.hpp"
#include "dce/pipeline.hpp"
#include "dce/reference.hpp"
#include "oracles.hpp"

using namespace dce;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}
std::string sci(double v) { return fmt("%.2e", v); }
std::string sec(double v) { return fmt("%.2f s", v); }

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

// Wall-clock of everything a method run did, summed over phases.
double total_seconds(const MethodRun& r) {
    double s = 0.0;
    for (const auto& [name, v] : r.phases) s += v;
    return s;
}

double worst(const CompareRow& r) { return std::max({r.ee_price, r.pfe_price, r.ee_risk, r.pfe_risk}); }
double worst_ee(const CompareRow& r) { return std::max(r.ee_price, r.ee_risk); }
double worst_pfe(const CompareRow& r) { return std::max(r.pfe_price, r.pfe_risk); }

std::string errors(const CompareRow& r) {
    return "EE " + sci(r.ee_price) + "/" + sci(r.ee_risk) + " PFE " + sci(r.pfe_price) + "/" + sci(r.pfe_risk);
}

EngineConfig with_degree(EngineConfig e, std::size_t n, bool split = false) {
    e.degree = n;
    e.split = split;
    e.split_left = e.split_right = 0;
    return e;
}

// One preset at desk scale: shared ensembles, a reference run and cached
// Chebyshev / LSM runs on the same paths.
class Bench {
  public:
    explicit Bench(const std::string& name) {
        std::fprintf(stderr, "[bench] %s: simulating\n", name.c_str());
        RunOverrides o;
        o.paths = 50000;
        o.out = (std::filesystem::temp_directory_path() / ("dce_acceptance_" + name)).string();
        cfg = load_config(name, o, {});
        grid = make_time_grid(cfg.simulation.maturity, cfg.simulation.steps_per_year);
        product = std::make_unique<Product>(cfg.product, cfg.model);
        ens = simulate_all(cfg, grid);
        for (const auto& [m, s] : ens.seconds) simulate_seconds += s;
    }

    const MethodRun& reference() {
        if (!ref_) {
            std::fprintf(stderr, "[bench] %s: full re-evaluation\n", cfg.name.c_str());
            ref_ = run_reference(cfg, *product, grid, ens);
            norm_ = error_normalizer(cfg, *product, ref_->price);
        }
        return *ref_;
    }
    double normalizer() {
        reference();
        return norm_;
    }

    const MethodRun& dc(const std::string& label, const EngineConfig& e) {
        auto it = dc_.find(label);
        if (it == dc_.end()) {
            std::fprintf(stderr, "[bench] %s: %s\n", cfg.name.c_str(), label.c_str());
            it = dc_.emplace(label, run_dc(cfg, e, label, *product, grid, ens)).first;
        }
        return it->second;
    }
    const MethodRun& dc(std::size_t n) { return dc("DC_" + std::to_string(n), with_degree(cfg.engine, n)); }
    const MethodRun& dc_split(std::size_t half) {
        return dc("DC_" + std::to_string(half) + "_" + std::to_string(half), with_degree(cfg.engine, 2 * half, true));
    }

    const MethodRun& lsm() {
        if (!lsm_) {
            std::fprintf(stderr, "[bench] %s: LSM\n", cfg.name.c_str());
            lsm_ = run_lsm(cfg, *product, grid, ens);
        }
        return *lsm_;
    }

    CompareRow row(const MethodRun& r) { return error_row(r, reference(), normalizer()); }

    RunConfig cfg;
    std::vector<double> grid;
    std::unique_ptr<Product> product;
    Ensembles ens;
    double simulate_seconds = 0.0;

  private:
    std::optional<MethodRun> ref_;
    double norm_ = 1.0;
    std::map<std::string, MethodRun> dc_;
    std::optional<MethodRun> lsm_;
};

std::map<std::string, std::unique_ptr<Bench>> benches;

Bench& bench(const std::string& name) {
    auto& b = benches[name];
    if (!b) b = std::make_unique<Bench>(name);
    return *b;
}

// ---------------------------------------------------------------------------

Outcome moments_vs_quadrature() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> mean_d(-1.5, 1.5), logsd(std::log(0.005), std::log(2.0));
    std::uniform_int_distribution<std::size_t> deg_d(1, 128);
    double dev = 0.0;
    double lib_seconds = 0.0;
    const auto t0 = Clock::now();
    for (int draw = 0; draw < 200; ++draw) {
        const double m = mean_d(rng), s = std::exp(logsd(rng));
        const std::size_t n = deg_d(rng);
        const auto t1 = Clock::now();
        const auto seq = truncated_normal_cheb_moments(m, s, n);
        lib_seconds += since(t1);
        for (std::size_t j = 0; j <= n; ++j) dev = std::max(dev, std::fabs(seq.mu[j] - oracle::truncated_moment(j, m, s)));
    }
    const double secs = since(t0);
    Outcome o;
    o.require(dev <= 1e-10, "max |dev| " + sci(dev) + " over 200 draws, N<=128");
    o.require(secs < 10.0, "runtime " + sec(secs) + " (recursion " + sec(lib_seconds) + ")");
    return o;
}

Outcome european_price() {
    const auto cfg = load_config("european_bs", {}, {});
    const Product p(cfg.product, cfg.model);
    const auto grid = make_time_grid(cfg.simulation.maturity, cfg.simulation.steps_per_year);
    InductionTiming timing;
    const auto t0 = Clock::now();
    const auto vf = backward_induction(cfg.model, p, grid, with_degree(cfg.engine, 128), nullptr, &timing);
    const double secs = since(t0);
    Outcome o;
    o.require(std::fabs(vf.price() - 8.3930) <= 1e-3, "DC_128 price " + fmt("%.6f", vf.price()));
    o.require(secs < 1.0, "runtime " + sec(secs));
    return o;
}

Outcome european_fidelity() {
    auto& b = bench("european_bs");
    const auto r32 = b.row(b.dc(32)), r64 = b.row(b.dc(64)), r128 = b.row(b.dc(128));
    const double secs = b.simulate_seconds + total_seconds(b.reference()) + total_seconds(b.dc(32)) +
                        total_seconds(b.dc(64)) + total_seconds(b.dc(128));
    Outcome o;
    o.require(worst(r128) <= 2e-4, "DC_128 " + errors(r128));
    o.require(worst_ee(r32) <= 0.02, "DC_32 EE " + sci(worst_ee(r32)));
    o.require(worst_ee(r32) >= worst_ee(r64) && worst_ee(r64) >= worst_ee(r128),
              "EE 32/64/128 " + sci(worst_ee(r32)) + " >= " + sci(worst_ee(r64)) + " >= " + sci(worst_ee(r128)));
    o.require(secs < 30.0, "runtime " + sec(secs));
    return o;
}

Outcome ee_price_constancy() {
    auto& b = bench("european_bs");
    const auto& run = b.dc(128);
    const auto& p = run.profiles.at(Measure::RiskNeutral);
    double worst_ratio = 0.0;
    std::size_t violations = 0;
    for (std::size_t u = 0; u < p.ee.size(); ++u) {
        const double dev = std::fabs(p.ee[u] - run.price);
        const double band = 3.0 * p.ee_stderr[u] + 1e-12 * run.price;
        if (dev > band) ++violations;
        worst_ratio = std::max(worst_ratio, dev / band);
    }
    Outcome o;
    o.require(violations == 0, "max |EE_Q(t) - V0| / (3 se(t)) = " + fmt("%.2f", worst_ratio) + " over " +
                                   std::to_string(p.ee.size()) + " dates");
    return o;
}

Outcome barrier() {
    auto& b = bench("barrier_bs");
    const auto& ref = b.reference();
    const auto r64 = b.row(b.dc(64)), r16 = b.row(b.dc(16));
    const double secs = b.simulate_seconds + total_seconds(ref) + total_seconds(b.dc(64)) + total_seconds(b.dc(16));
    Outcome o;
    o.require(std::fabs(ref.price - 2.6453) <= 2e-3, "COS reference price " + fmt("%.6f", ref.price) + " vs 2.6453");
    o.require(worst(r64) <= 5e-4, "DC_64 " + errors(r64));
    o.require(worst(r16) <= 0.03, "DC_16 " + errors(r16));
    o.require(secs < 60.0, "runtime " + sec(secs));
    return o;
}

Outcome bermudan_merton() {
    auto& b = bench("bermudan_merton");
    const auto& ref = b.reference();
    const auto r512 = b.row(b.dc(512)), r256 = b.row(b.dc(256)), rl = b.row(b.lsm());
    const double secs = b.simulate_seconds + total_seconds(ref) + total_seconds(b.dc(512)) +
                        total_seconds(b.dc(256)) + total_seconds(b.lsm());
    Outcome o;
    o.require(std::fabs(ref.price - 14.0739) <= 0.02, "reference price " + fmt("%.6f", ref.price));
    o.require(worst(r512) <= 5e-4, "DC_512 " + errors(r512));
    o.require(worst_pfe(r256) < worst_pfe(rl), "PFE DC_256 " + sci(worst_pfe(r256)) + " < LSM " + sci(worst_pfe(rl)));
    o.require(secs < 300.0, "runtime " + sec(secs));
    return o;
}

Outcome swaption() {
    auto& b = bench("swaption_hw");
    const auto& dc = b.dc(128);
    const auto r = b.row(dc);
    const double secs = b.simulate_seconds + total_seconds(b.reference()) + total_seconds(dc);
    Outcome o;
    const double rel = std::fabs(dc.price - 5.463) / 5.463;
    o.require(rel <= 0.01, "DC_128 price " + fmt("%.5f", dc.price) + " (rel " + sci(rel) + ")");
    o.require(worst(r) <= 5e-3, "DC_128 vs DC_512 " + errors(r));
    o.require(secs < 300.0, "runtime " + sec(secs));
    return o;
}

Outcome split_domain() {
    auto& e = bench("european_bs");
    const double gap = std::fabs(e.dc_split(64).price - e.dc(128).price);
    auto& m = bench("bermudan_merton");
    const auto split = m.row(m.dc_split(128)), plain = m.row(m.dc(256));
    Outcome o;
    o.require(gap <= 1e-4, "European DC_64_64 vs DC_128 price gap " + sci(gap));
    const bool within = split.ee_price <= 3 * plain.ee_price && split.pfe_price <= 3 * plain.pfe_price &&
                        split.ee_risk <= 3 * plain.ee_risk && split.pfe_risk <= 3 * plain.pfe_risk;
    o.require(within, "Merton DC_128_128 " + errors(split) + " vs DC_256 " + errors(plain));
    return o;
}

Outcome speed_ordering() {
    Outcome o;
    for (const char* name : {"european_bs", "bermudan_merton"}) {
        auto& b = bench(name);
        const auto& dc = b.dc(128);
        const auto& lsm = b.lsm();
        for (Measure m : {Measure::RiskNeutral, Measure::RealWorld}) {
            o.require(dc.seconds.at(m) < lsm.seconds.at(m), std::string(name) + " " + to_string(m) + " DC_128 " +
                                                                 sec(dc.seconds.at(m)) + " < LSM " + sec(lsm.seconds.at(m)));
        }
    }
    for (const char* name : {"barrier_bs", "bermudan_merton"}) {
        auto& b = bench(name);
        const auto& dc = b.dc(b.cfg.engine.degree);
        const auto& ref = b.reference();
        for (Measure m : {Measure::RiskNeutral, Measure::RealWorld}) {
            const double ratio = ref.seconds.at(m) / dc.seconds.at(m);
            o.require(ratio >= 10.0, std::string(name) + " " + to_string(m) + " full/DC_" +
                                         std::to_string(b.cfg.engine.degree) + " " + fmt("%.1fx", ratio));
        }
    }
    return o;
}

// Preset DC runtime per measure, best of three to damp scheduler noise.
Outcome measure_invariance() {
    Outcome o;
    for (const auto& name : preset_names()) {
        auto& b = bench(name);
        std::map<Measure, double> best;
        for (int rep = 0; rep < 3; ++rep) {
            const auto r = run_dc(b.cfg, b.cfg.engine, "dc", *b.product, b.grid, b.ens);
            for (const auto& [m, s] : r.seconds) best[m] = rep == 0 ? s : std::min(best[m], s);
        }
        const double q = best.at(Measure::RiskNeutral), p = best.at(Measure::RealWorld);
        o.require(std::fabs(p - q) <= 0.2 * q, name + " P/Q " + fmt("%.3f", p / q));
    }
    return o;
}

Outcome greeks() {
    const auto cfg = load_config("european_bs", {}, {});
    const BlackScholesParams bs = std::get<BlackScholesParams>(cfg.model);
    const Product p(cfg.product, cfg.model);
    const auto grid = make_time_grid(1.0, cfg.simulation.steps_per_year);
    const auto vf = backward_induction(cfg.model, p, grid, with_degree(cfg.engine, 128));
    // mid-life slice, central band of the state
    const std::size_t u = 25;
    const double tau = 1.0 - grid[u];
    const auto d1 = vf.value[u].derivative();
    const auto d2 = d1.derivative();
    double wd = 0.0, wg = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double x = -0.3 + 0.6 * i / 99.0;
        const double s = bs.s0 * std::exp(x);
        const double delta = x_to_spot_delta(d1(x), s);
        const double gamma = x_to_spot_gamma(d1(x), d2(x), s);
        const double rd = oracle::bs_delta(s, 100, bs.r, bs.sigma, tau, oracle::Kind::Put);
        const double rg = oracle::bs_gamma(s, 100, bs.r, bs.sigma, tau);
        wd = std::max(wd, std::fabs(delta - rd) / std::fabs(rd));
        wg = std::max(wg, std::fabs(gamma - rg) / rg);
    }
    Outcome o;
    o.require(wd <= 1e-3 && wg <= 1e-3, "t=0.5, x in [-0.3, 0.3]: rel Delta " + sci(wd) + ", Gamma " + sci(wg));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    double fd_dev = 0.0;
    const Domain d(-0.7, 1.9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> coef(3 + trial % 10);
        for (auto& c : coef) c = n01(rng);
        auto poly = [&](double x) {
            double v = 0.0;
            for (auto it = coef.rbegin(); it != coef.rend(); ++it) v = v * x + *it;
            return v;
        };
        std::vector<double> vals;
        for (double x : cheb_nodes(16, d)) vals.push_back(poly(x));
        const auto approx = fit(vals, d);
        const auto deriv = differentiate(approx);
        for (int i = 0; i < 20; ++i) {
            const double x = d.lower + d.width() * unif(rng);
            const double h = 1e-5;
            const double fd = (approx(x + h) - approx(x - h)) / (2 * h);
            fd_dev = std::max(fd_dev, std::fabs(deriv(x) - fd) / std::max(1.0, std::fabs(fd)));
        }
    }
    o.require(fd_dev <= 1e-6, "derivative vs finite differences " + sci(fd_dev));
    return o;
}

Outcome property_suites() {
    std::size_t checks = 0, failures = 0;
    auto check = [&](bool ok) {
        ++checks;
        failures += ok ? 0 : 1;
    };
    std::mt19937_64 rng(77);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // interpolation exactness on polynomials of degree <= N
    for (std::size_t n : {4u, 16u, 64u}) {
        const Domain d(-1.5, 2.0);
        std::vector<double> a(n + 1);
        double scale = 0.0;
        for (auto& c : a) {
            c = n01(rng);
            scale += std::fabs(c);
        }
        auto f = [&](double x) {
            const double z = d.to_unit(x);
            double v = 0.0;
            for (auto it = a.rbegin(); it != a.rend(); ++it) v = v * z + *it;
            return v;
        };
        std::vector<double> vals;
        for (double x : cheb_nodes(n, d)) vals.push_back(f(x));
        const auto approx = fit(vals, d);
        for (int i = 0; i < 100; ++i) {
            const double x = d.lower + d.width() * unif(rng);
            check(std::fabs(approx(x) - f(x)) <= 1e-13 * static_cast<double>(n + 1) * scale);
        }
    }
    // Clenshaw against the trigonometric sum
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> c(1 + trial % 60);
        for (auto& v : c) v = n01(rng);
        const double z = -1.0 + 2.0 * unif(rng);
        double direct = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            direct += c[j] * oracle::cheb_t(j, z);
            scale += std::fabs(c[j]);
        }
        check(std::fabs(clenshaw(c, z) - direct) <= 1e-13 * std::max(1.0, scale));
    }
    // Gamma bounds: 0 <= Gamma_k0 <= 1 and |Gamma_kj| <= Gamma_k0
    for (auto [drift, var] : {std::pair{0.0, 0.01}, std::pair{0.05, 0.0025}, std::pair{-0.3, 0.5}}) {
        const auto m = normal_moment_matrix(Domain(-1.2, 0.9), drift, var, 64);
        for (Eigen::Index k = 0; k < m.gamma.rows(); ++k) {
            const double p = m.gamma(k, 0);
            check(p >= 0.0 && p <= 1.0 + 1e-15);
            for (Eigen::Index j = 1; j < m.gamma.cols(); ++j) check(std::fabs(m.gamma(k, j)) <= p + 1e-14);
        }
    }
    // exposure: non-negativity, absorption after exercise, alive counts
    {
        const auto cfg = load_config("bermudan_merton", {}, {});
        const Product prod(cfg.product, cfg.model);
        const auto grid = make_time_grid(1.0, 50.0);
        const auto vf = backward_induction(cfg.model, prod, grid, with_degree(cfg.engine, 64));
        const ChebValuer valuer(vf, prod);
        const auto ens = simulate(cfg.model, Measure::RealWorld, 4000, grid, 17);
        ExposureOptions opt;
        opt.retain_matrix = true;
        const auto p = compute_exposure(valuer, ens, prod, cfg.model, opt);
        std::vector<double> held(ens.paths);
        std::vector<bool> dead(ens.paths, false);
        for (std::size_t u = 0; u < grid.size(); ++u) {
            valuer.held_value(u, ens.at(u), held);
            for (std::size_t i = 0; i < ens.paths; ++i) {
                const double e = p.exposure(i, u);
                check(e >= 0.0);
                if (dead[i]) {
                    check(e == 0.0);
                    continue;
                }
                if (u > 0 && vf.decision[u]) {
                    const double g = prod.intrinsic(grid[u], ens(i, u));
                    if (g > 0.0 && g >= held[i]) dead[i] = true;
                }
            }
            if (u > 0) check(p.alive_counts[u] <= p.alive_counts[u - 1]);
            const auto alive = static_cast<std::size_t>(std::count(dead.begin(), dead.end(), false));
            check(p.alive_counts[u] == alive);
        }
    }
    // PFE against the brute-force order statistic
    for (std::size_t m : {1u, 7u, 40u, 1000u, 4001u}) {
        for (double alpha : {0.5, 0.9, 0.975, 0.99}) {
            std::vector<double> v(m);
            for (auto& x : v) x = std::max(0.0, std::round(4.0 * n01(rng)) / 4.0);
            check(pfe_quantile(v, alpha) == oracle::order_statistic(v, alpha));
        }
    }
    // determinism under fixed seeds and across thread counts
    {
        const MertonParams mj;
        const auto grid = make_time_grid(1.0, 50.0);
        const auto a = simulate(mj, Measure::RealWorld, 3000, grid, 9);
        const auto b = simulate(mj, Measure::RealWorld, 3000, grid, 9);
        check(a.values == b.values);
        const Product prod(load_config("bermudan_merton", {}, {}).product, ModelSpec(mj));
        const auto vf = backward_induction(ModelSpec(mj), prod, grid, with_degree(EngineConfig{}, 32));
        const ChebValuer valuer(vf, prod);
        set_thread_count(1);
        const auto p1 = compute_exposure(valuer, a, prod, mj);
        set_thread_count(3);
        const auto p3 = compute_exposure(valuer, a, prod, mj);
        set_thread_count(0);
        check(p1.ee == p3.ee && p1.pfe == p3.pfe && p1.alive_counts == p3.alive_counts);
    }
    Outcome o;
    o.require(failures == 0, std::to_string(failures) + " failures in " + std::to_string(checks) + " property checks");
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"moment recursion vs adaptive quadrature", moments_vs_quadrature},
        {"European BS t=0 price", european_price},
        {"European BS exposure fidelity", european_fidelity},
        {"EE under the pricing measure is constant", ee_price_constancy},
        {"barrier BS", barrier},
        {"Bermudan Merton", bermudan_merton},
        {"Hull-White swaption", swaption},
        {"split-domain equivalence", split_domain},
        {"speed ordering at desk scale", speed_ordering},
        {"measure invariance of cost", measure_invariance},
        {"Greeks", greeks},
        {"property suites", property_suites},
    };
    set_thread_count(0);
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].title, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
