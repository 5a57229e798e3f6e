#include "dce/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dce/errors.hpp"
#include "dce/parallel.hpp"

namespace dce {

std::string to_string(Measure m) { return m == Measure::RiskNeutral ? "Q" : "P"; }

Measure measure_from_string(const std::string& s) {
    if (s == "Q" || s == "q" || s == "risk_neutral" || s == "pricing") return Measure::RiskNeutral;
    if (s == "P" || s == "p" || s == "real_world" || s == "risk") return Measure::RealWorld;
    throw ParameterError("unknown measure '" + s + "'");
}

void BlackScholesParams::validate() const {
    if (!(sigma > 0.0)) throw ParameterError("black-scholes: sigma must be > 0");
    if (!(s0 > 0.0)) throw ParameterError("black-scholes: s0 must be > 0");
    if (!std::isfinite(r) || !std::isfinite(mu)) throw ParameterError("black-scholes: r and mu must be finite");
}

void MertonParams::validate() const {
    if (!(sigma > 0.0)) throw ParameterError("merton: sigma must be > 0");
    if (!(s0 > 0.0)) throw ParameterError("merton: s0 must be > 0");
    if (!(jump_std > 0.0)) throw ParameterError("merton: jump_std must be > 0");
    if (!(intensity >= 0.0)) throw ParameterError("merton: intensity must be >= 0");
    if (!std::isfinite(r) || !std::isfinite(mu) || !std::isfinite(jump_mean)) {
        throw ParameterError("merton: r, mu and jump_mean must be finite");
    }
}

double MertonParams::log_drift(Measure m) const {
    const double drift = m == Measure::RiskNeutral ? r : mu;
    const double kappa = std::exp(jump_mean + 0.5 * jump_std * jump_std) - 1.0;
    return drift - 0.5 * sigma * sigma - intensity * kappa;
}

void HullWhiteParams::validate() const {
    if (!(a_q > 0.0) || !(a_p > 0.0)) throw ParameterError("hull-white: mean-reversion speeds must be > 0");
    if (!(sigma_q > 0.0) || !(sigma_p > 0.0)) throw ParameterError("hull-white: volatilities must be > 0");
    if (!std::isfinite(flat_forward)) throw ParameterError("hull-white: flat_forward must be finite");
}

std::string model_name(const ModelSpec& model) {
    switch (model.index()) {
        case 0: return "black_scholes";
        case 1: return "merton";
        default: return "hull_white";
    }
}

std::vector<double> make_time_grid(double maturity, double steps_per_year) {
    if (!(maturity > 0.0)) throw ParameterError("time grid: maturity must be > 0");
    if (!(steps_per_year > 0.0)) throw ParameterError("time grid: steps_per_year must be > 0");
    const auto n = static_cast<std::size_t>(std::llround(maturity * steps_per_year));
    if (n < 1) throw ParameterError("time grid: fewer than one step");
    std::vector<double> grid(n + 1);
    for (std::size_t u = 0; u <= n; ++u) grid[u] = maturity * static_cast<double>(u) / static_cast<double>(n);
    grid.back() = maturity;
    return grid;
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
    // splitmix64 finaliser over a combined key
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (path + 1) + 0xD1B54A32D192ED03ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

void check_simulation(std::size_t paths, const std::vector<double>& grid) {
    if (paths == 0) throw ParameterError("simulate: number of paths must be > 0");
    if (grid.size() < 2) throw ParameterError("simulate: grid needs at least two points");
    for (std::size_t u = 1; u < grid.size(); ++u) {
        if (!(grid[u] > grid[u - 1])) throw ParameterError("simulate: grid must be strictly increasing");
    }
}

PathEnsemble empty_ensemble(Measure m, std::size_t paths, const std::vector<double>& grid, std::uint64_t seed,
                            double x0) {
    PathEnsemble e;
    e.grid = grid;
    e.paths = paths;
    e.measure = m;
    e.seed = seed;
    e.values.assign(grid.size() * paths, 0.0);
    std::fill(e.values.begin(), e.values.begin() + static_cast<std::ptrdiff_t>(paths), x0);
    return e;
}

constexpr std::uint64_t kDiffusionStream = 0;
constexpr std::uint64_t kJumpStream = 1;
constexpr std::size_t kMinPathChunk = 256;

}  // namespace

PathEnsemble simulate_bs(const BlackScholesParams& p, Measure m, std::size_t paths, const std::vector<double>& grid,
                         std::uint64_t seed) {
    p.validate();
    check_simulation(paths, grid);
    PathEnsemble e = empty_ensemble(m, paths, grid, seed, 0.0);
    const double drift = (m == Measure::RiskNeutral ? p.r : p.mu) - 0.5 * p.sigma * p.sigma;
    const std::size_t n = grid.size() - 1;
    std::vector<double> mean(n), sd(n);
    for (std::size_t u = 0; u < n; ++u) {
        const double dt = grid[u + 1] - grid[u];
        mean[u] = drift * dt;
        sd[u] = p.sigma * std::sqrt(dt);
    }
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::mt19937_64 rng(path_seed(seed, i, kDiffusionStream));
            std::normal_distribution<double> normal;
            double x = 0.0;
            for (std::size_t u = 0; u < n; ++u) {
                x += mean[u] + sd[u] * normal(rng);
                e.values[(u + 1) * paths + i] = x;
            }
        }
    }, kMinPathChunk);
    return e;
}

PathEnsemble simulate_merton(const MertonParams& p, Measure m, std::size_t paths, const std::vector<double>& grid,
                             std::uint64_t seed) {
    p.validate();
    check_simulation(paths, grid);
    PathEnsemble e = empty_ensemble(m, paths, grid, seed, 0.0);
    const double drift = p.log_drift(m);
    const std::size_t n = grid.size() - 1;
    std::vector<double> mean(n), sd(n), rate(n);
    for (std::size_t u = 0; u < n; ++u) {
        const double dt = grid[u + 1] - grid[u];
        mean[u] = drift * dt;
        sd[u] = p.sigma * std::sqrt(dt);
        rate[u] = p.intensity * dt;
    }
    const bool jumps = p.intensity > 0.0;
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::mt19937_64 rng(path_seed(seed, i, kDiffusionStream));
            std::normal_distribution<double> normal;
            std::mt19937_64 jump_rng(path_seed(seed, i, kJumpStream));
            std::normal_distribution<double> jump_normal;
            double x = 0.0;
            for (std::size_t u = 0; u < n; ++u) {
                x += mean[u] + sd[u] * normal(rng);
                if (jumps) {
                    std::poisson_distribution<int> poisson(rate[u]);
                    const int count = poisson(jump_rng);
                    if (count > 0) {
                        const double c = static_cast<double>(count);
                        x += c * p.jump_mean + p.jump_std * std::sqrt(c) * jump_normal(jump_rng);
                    }
                }
                e.values[(u + 1) * paths + i] = x;
            }
        }
    }, kMinPathChunk);
    return e;
}

PathEnsemble simulate_hw(const HullWhiteParams& p, Measure m, std::size_t paths, const std::vector<double>& grid,
                         std::uint64_t seed) {
    p.validate();
    check_simulation(paths, grid);
    PathEnsemble e = empty_ensemble(m, paths, grid, seed, 0.0);
    const double a = p.speed(m);
    const double s = p.vol(m);
    const std::size_t n = grid.size() - 1;
    std::vector<double> decay(n), sd(n);
    for (std::size_t u = 0; u < n; ++u) {
        const double dt = grid[u + 1] - grid[u];
        decay[u] = std::exp(-a * dt);
        sd[u] = s * std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a));
    }
    parallel_for(paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            std::mt19937_64 rng(path_seed(seed, i, kDiffusionStream));
            std::normal_distribution<double> normal;
            double x = 0.0;
            for (std::size_t u = 0; u < n; ++u) {
                x = decay[u] * x + sd[u] * normal(rng);
                e.values[(u + 1) * paths + i] = x;
            }
        }
    }, kMinPathChunk);
    return e;
}

PathEnsemble simulate(const ModelSpec& model, Measure m, std::size_t paths, const std::vector<double>& grid,
                      std::uint64_t seed) {
    return std::visit(
        [&](const auto& p) -> PathEnsemble {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BlackScholesParams>) {
                return simulate_bs(p, m, paths, grid, seed);
            } else if constexpr (std::is_same_v<T, MertonParams>) {
                return simulate_merton(p, m, paths, grid, seed);
            } else {
                return simulate_hw(p, m, paths, grid, seed);
            }
        },
        model);
}

std::complex<double> merton_cf(std::complex<double> z, double t, const MertonParams& p) {
    const std::complex<double> i(0.0, 1.0);
    const double b = p.log_drift(Measure::RiskNeutral);
    const double s2 = p.sigma * p.sigma;
    const double b2 = p.jump_std * p.jump_std;
    const std::complex<double> jump = std::exp(i * z * p.jump_mean - 0.5 * b2 * z * z) - 1.0;
    return std::exp(t * (i * b * z - 0.5 * s2 * z * z + p.intensity * jump));
}

Cumulants merton_cumulants(double t, const MertonParams& p, Measure m) {
    const double a = p.jump_mean;
    const double b2 = p.jump_std * p.jump_std;
    Cumulants c;
    c.c1 = t * (p.log_drift(m) + p.intensity * a);
    c.c2 = t * (p.sigma * p.sigma + p.intensity * (a * a + b2));
    c.c4 = t * p.intensity * (a * a * a * a + 6.0 * a * a * b2 + 3.0 * b2 * b2);
    return c;
}

double state_mean(const ModelSpec& model, Measure m, double t) {
    if (const auto* bs = std::get_if<BlackScholesParams>(&model)) {
        return ((m == Measure::RiskNeutral ? bs->r : bs->mu) - 0.5 * bs->sigma * bs->sigma) * t;
    }
    if (const auto* mj = std::get_if<MertonParams>(&model)) return merton_cumulants(t, *mj, m).c1;
    return 0.0;
}

double state_std(const ModelSpec& model, Measure m, double t) {
    if (const auto* bs = std::get_if<BlackScholesParams>(&model)) return bs->sigma * std::sqrt(t);
    if (const auto* mj = std::get_if<MertonParams>(&model)) return std::sqrt(merton_cumulants(t, *mj, m).c2);
    const auto& hw = std::get<HullWhiteParams>(model);
    const double a = hw.speed(m);
    const double s = hw.vol(m);
    return s * std::sqrt(-std::expm1(-2.0 * a * t) / (2.0 * a));
}

double hw_alpha(double t, const HullWhiteParams& p) {
    const double g = -std::expm1(-p.a_q * t);
    return p.flat_forward + p.sigma_q * p.sigma_q * g * g / (2.0 * p.a_q * p.a_q);
}

double hw_B(double t, double T, const HullWhiteParams& p) { return -std::expm1(-p.a_q * (T - t)) / p.a_q; }

namespace {

// Variance of the integrated OU state over [t, T].
double hw_V(double t, double T, const HullWhiteParams& p) {
    const double a = p.a_q;
    const double tau = T - t;
    const double s2 = p.sigma_q * p.sigma_q;
    return s2 / (a * a) * (tau + 2.0 / a * std::exp(-a * tau) - 0.5 / a * std::exp(-2.0 * a * tau) - 1.5 / a);
}

}  // namespace

double hw_zcb(double x, double t, double T, const HullWhiteParams& p) {
    if (T < t) throw ParameterError("hw_zcb: maturity before valuation time");
    if (T == t) return 1.0;
    const double f = p.flat_forward;
    const double log_a = -f * (T - t) + 0.5 * (hw_V(t, T, p) - hw_V(0.0, T, p) + hw_V(0.0, t, p));
    return std::exp(log_a - hw_B(t, T, p) * x);
}

double short_rate(const ModelSpec& model, double t, double x) {
    if (const auto* bs = std::get_if<BlackScholesParams>(&model)) return bs->r;
    if (const auto* mj = std::get_if<MertonParams>(&model)) return mj->r;
    return hw_alpha(t, std::get<HullWhiteParams>(model)) + x;
}

bool has_stochastic_rate(const ModelSpec& model) { return std::holds_alternative<HullWhiteParams>(model); }

std::vector<double> pathwise_discount(const PathEnsemble& ensemble, const ModelSpec& model) {
    const std::size_t m = ensemble.paths;
    const auto& grid = ensemble.grid;
    std::vector<double> d(ensemble.values.size(), 1.0);
    if (!has_stochastic_rate(model)) {
        for (std::size_t u = 0; u < grid.size(); ++u) {
            const double v = std::exp(-short_rate(model, grid[u], 0.0) * grid[u]);
            std::fill_n(d.begin() + static_cast<std::ptrdiff_t>(u * m), m, v);
        }
        return d;
    }
    const auto& hw = std::get<HullWhiteParams>(model);
    for (std::size_t u = 0; u + 1 < grid.size(); ++u) {
        const double dt = grid[u + 1] - grid[u];
        const double alpha = hw_alpha(grid[u], hw);
        const double* x = ensemble.values.data() + u * m;
        const double* prev = d.data() + u * m;
        double* next = d.data() + (u + 1) * m;
        for (std::size_t i = 0; i < m; ++i) next[i] = prev[i] * std::exp(-dt * (alpha + x[i]));
    }
    return d;
}

}  // namespace dce
