#pragma once

// Risk-factor models and path simulation.
//
// Equity models use the log-return X_t = log(S_t / S_0); Hull-White uses the
// Ornstein-Uhlenbeck state x_t with r_t = alpha(t) + x_t.

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dce {

enum class Measure { RiskNeutral, RealWorld };

std::string to_string(Measure m);
Measure measure_from_string(const std::string& s);

struct BlackScholesParams {
    double s0 = 100.0;
    double sigma = 0.25;
    double r = 0.03;
    double mu = 0.1;

    void validate() const;
};

struct MertonParams {
    double s0 = 100.0;
    double sigma = 0.25;
    double r = 0.03;
    double mu = 0.1;
    double jump_mean = -0.5;  // alpha
    double jump_std = 0.4;    // beta
    double intensity = 0.4;   // lambda

    void validate() const;
    /// Drift of the log-return under the given measure, jumps compensated.
    double log_drift(Measure m) const;
};

struct HullWhiteParams {
    double a_q = 0.02;
    double sigma_q = 0.02;
    double a_p = 0.015;
    double sigma_p = 0.01;
    double flat_forward = 0.01;

    void validate() const;
    double speed(Measure m) const { return m == Measure::RiskNeutral ? a_q : a_p; }
    double vol(Measure m) const { return m == Measure::RiskNeutral ? sigma_q : sigma_p; }
};

using ModelSpec = std::variant<BlackScholesParams, MertonParams, HullWhiteParams>;

std::string model_name(const ModelSpec& model);

/// Uniform grid t_u = u T / n with n = round(T * steps_per_year).
std::vector<double> make_time_grid(double maturity, double steps_per_year);

/// Risk-factor values for M paths on a grid, stored time-major.
struct PathEnsemble {
    std::vector<double> grid;
    std::size_t paths = 0;
    std::vector<double> values;  // values[u * paths + i]
    Measure measure = Measure::RiskNeutral;
    std::uint64_t seed = 0;

    std::size_t steps() const noexcept { return grid.empty() ? 0 : grid.size() - 1; }
    std::span<const double> at(std::size_t u) const noexcept {
        return {values.data() + u * paths, paths};
    }
    std::span<double> at(std::size_t u) noexcept { return {values.data() + u * paths, paths}; }
    double operator()(std::size_t path, std::size_t u) const noexcept { return values[u * paths + path]; }
};

/// Independent per-path seed derived from (seed, path, stream).
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path, std::uint64_t stream);

PathEnsemble simulate_bs(const BlackScholesParams& p, Measure m, std::size_t paths, const std::vector<double>& grid,
                         std::uint64_t seed);
PathEnsemble simulate_merton(const MertonParams& p, Measure m, std::size_t paths, const std::vector<double>& grid,
                             std::uint64_t seed);
PathEnsemble simulate_hw(const HullWhiteParams& p, Measure m, std::size_t paths, const std::vector<double>& grid,
                         std::uint64_t seed);
PathEnsemble simulate(const ModelSpec& model, Measure m, std::size_t paths, const std::vector<double>& grid,
                      std::uint64_t seed);

/// Characteristic function of X_t under the pricing measure.
std::complex<double> merton_cf(std::complex<double> z, double t, const MertonParams& p);

struct Cumulants {
    double c1 = 0.0;
    double c2 = 0.0;
    double c4 = 0.0;
};

Cumulants merton_cumulants(double t, const MertonParams& p, Measure m = Measure::RiskNeutral);

/// Mean and standard deviation of the risk factor at time t, started at x_0 = 0.
double state_mean(const ModelSpec& model, Measure m, double t);
double state_std(const ModelSpec& model, Measure m, double t);

double hw_alpha(double t, const HullWhiteParams& p);
double hw_B(double t, double T, const HullWhiteParams& p);
/// Zero-coupon bond P(t, T) given x_t = x, pricing-measure parameters.
double hw_zcb(double x, double t, double T, const HullWhiteParams& p);

/// Short rate at (t, x); deterministic models ignore x.
double short_rate(const ModelSpec& model, double t, double x);
bool has_stochastic_rate(const ModelSpec& model);

/// Pathwise D(0, t_u), time-major like the ensemble. Stochastic rates use the
/// left-point rule D(0, t_{u+1}) = D(0, t_u) exp(-dt r(t_u, x_{t_u})).
std::vector<double> pathwise_discount(const PathEnsemble& ensemble, const ModelSpec& model);

}  // namespace dce
