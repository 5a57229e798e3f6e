#pragma once

// Independent pricers used for full re-evaluation: Black-Scholes closed
// forms, the Fourier-cosine (COS) expansion for European prices, and a COS
// backward induction for Bermudan and discretely monitored barrier options.

#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "dce/exposure.hpp"
#include "dce/models.hpp"
#include "dce/products.hpp"

namespace dce {

double norm_cdf(double x);
double norm_pdf(double x);

double bs_european(double s, double strike, double r, double sigma, double tau, OptionKind kind);
/// Spot Delta and Gamma of the Black-Scholes price.
double bs_delta(double s, double strike, double r, double sigma, double tau, OptionKind kind);
double bs_gamma(double s, double strike, double r, double sigma, double tau);
/// e^{-r tau} E[(S_tau - K) 1{K < S_tau <= B}].
double bs_capped_call(double s, double strike, double barrier, double r, double sigma, double tau);

/// Law of the log-return log(S_tau / S_0) over a horizon, under the pricing measure.
struct LogReturnLaw {
    std::function<std::complex<double>(double)> cf;
    Cumulants cumulants;
};

LogReturnLaw bs_law(const BlackScholesParams& p, double tau);
LogReturnLaw merton_law(const MertonParams& p, double tau);
/// BS or Merton; throws ConfigurationError for Hull-White.
LogReturnLaw equity_law(const ModelSpec& model, double tau);

struct CosConfig {
    double truncation_l = 10.0;
    std::size_t terms = 1024;
};

struct CosDiagnostics {
    double tail = 0.0;  // |last term| of the expansion
    bool converged = true;
};

/// e^{-r tau} E[g(s e^Y) 1{Y <= knockout}] for a put or call. The default
/// knockout level switches the barrier off.
double cos_european(const LogReturnLaw& law, double s, double strike, double r, double tau, OptionKind kind,
                    const CosConfig& config = {}, double knockout_log_level = std::numeric_limits<double>::infinity(),
                    CosDiagnostics* diag = nullptr);

struct CosBackwardConfig {
    double truncation_l = 10.0;
    std::size_t terms = 4096;
};

/// Reference value functions from a COS backward induction. Continuation
/// values are kept as cosine series and can be evaluated at any x.
class CosReference : public PathValuer {
  public:
    const std::vector<double>& grid() const override { return grid_; }
    void held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const override;
    double held(std::size_t u, double x) const;
    double price() const { return held(0, 0.0); }
    std::size_t terms() const noexcept { return terms_; }
    /// Early-exercise boundary at t_u (NaN where none was computed).
    double exercise_boundary(std::size_t u) const { return boundary_[u]; }

  private:
    friend CosReference cos_backward_reference(const ModelSpec&, const Product&, const std::vector<double>&,
                                               const CosBackwardConfig&);
    const Product* product_ = nullptr;
    std::vector<double> grid_;
    std::vector<bool> decision_;
    double a_ = 0.0;
    double omega_ = 0.0;
    std::size_t terms_ = 0;
    // series[u][j] for u < n: held value at t_u is Re sum_j series[u][j] e^{i j omega (x - a)}
    std::vector<std::vector<std::complex<double>>> series_;
    std::vector<double> boundary_;
};

CosReference cos_backward_reference(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                    const CosBackwardConfig& config = {});

/// Black-Scholes price along paths for a European option.
class AnalyticEuropeanValuer : public PathValuer {
  public:
    AnalyticEuropeanValuer(const BlackScholesParams& p, const EuropeanSpec& spec, std::vector<double> grid);
    const std::vector<double>& grid() const override { return grid_; }
    void held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const override;

  private:
    BlackScholesParams params_;
    EuropeanSpec spec_;
    std::vector<double> grid_;
};

/// Exposure profile from a reference valuer (tagged full_reeval).
ExposureProfile full_reevaluation_exposure(const PathValuer& reference, const PathEnsemble& ensemble,
                                           const Product& product, const ModelSpec& model,
                                           const ExposureOptions& options = {});

struct ProfileError {
    double ee = 0.0;
    double pfe = 0.0;
};

/// max_u |a[u] - b[u]| / normalizer for EE and PFE.
ProfileError profile_error(const ExposureProfile& a, const ExposureProfile& b, double normalizer);

}  // namespace dce
