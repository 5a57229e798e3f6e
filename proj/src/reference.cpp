#include "dce/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cos_common.hpp"
#include "dce/errors.hpp"

namespace dce {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

namespace {

double intrinsic(double s, double strike, OptionKind kind) {
    return kind == OptionKind::Put ? std::max(strike - s, 0.0) : std::max(s - strike, 0.0);
}

struct D12 {
    double d1;
    double d2;
};

D12 d12(double s, double strike, double r, double sigma, double tau) {
    const double v = sigma * std::sqrt(tau);
    const double d1 = (std::log(s / strike) + (r + 0.5 * sigma * sigma) * tau) / v;
    return {d1, d1 - v};
}

bool degenerate(double sigma, double tau) { return !(sigma * std::sqrt(tau) > 1e-12); }

}  // namespace

double bs_european(double s, double strike, double r, double sigma, double tau, OptionKind kind) {
    if (tau < 0.0) throw ParameterError("bs_european: tau must be >= 0");
    if (tau == 0.0) return intrinsic(s, strike, kind);
    const double df = std::exp(-r * tau);
    if (degenerate(sigma, tau)) return df * intrinsic(s / df, strike, kind);
    const auto [d1, d2] = d12(s, strike, r, sigma, tau);
    if (kind == OptionKind::Call) return s * norm_cdf(d1) - strike * df * norm_cdf(d2);
    return strike * df * norm_cdf(-d2) - s * norm_cdf(-d1);
}

double bs_delta(double s, double strike, double r, double sigma, double tau, OptionKind kind) {
    if (tau <= 0.0 || degenerate(sigma, tau)) {
        const double fwd = s * std::exp(r * std::max(tau, 0.0));
        if (kind == OptionKind::Call) return fwd > strike ? 1.0 : 0.0;
        return fwd < strike ? -1.0 : 0.0;
    }
    const double d1 = d12(s, strike, r, sigma, tau).d1;
    return kind == OptionKind::Call ? norm_cdf(d1) : norm_cdf(d1) - 1.0;
}

double bs_gamma(double s, double strike, double r, double sigma, double tau) {
    if (tau <= 0.0 || degenerate(sigma, tau)) return 0.0;
    const double d1 = d12(s, strike, r, sigma, tau).d1;
    return norm_pdf(d1) / (s * sigma * std::sqrt(tau));
}

double bs_capped_call(double s, double strike, double barrier, double r, double sigma, double tau) {
    if (!(barrier > strike)) return 0.0;
    if (tau <= 0.0 || degenerate(sigma, tau)) {
        const double fwd = s * std::exp(r * std::max(tau, 0.0));
        const double df = std::exp(-r * std::max(tau, 0.0));
        return (fwd > strike && fwd <= barrier) ? df * (fwd - strike) : 0.0;
    }
    const double df = std::exp(-r * tau);
    const double d2b = d12(s, barrier, r, sigma, tau).d2;
    return bs_european(s, strike, r, sigma, tau, OptionKind::Call) -
           bs_european(s, barrier, r, sigma, tau, OptionKind::Call) - (barrier - strike) * df * norm_cdf(d2b);
}

LogReturnLaw bs_law(const BlackScholesParams& p, double tau) {
    p.validate();
    const double b = p.r - 0.5 * p.sigma * p.sigma;
    const double v = p.sigma * p.sigma * tau;
    LogReturnLaw law;
    law.cf = [b, v, tau](double z) { return std::exp(std::complex<double>(-0.5 * v * z * z, b * tau * z)); };
    law.cumulants = {b * tau, v, 0.0};
    return law;
}

LogReturnLaw merton_law(const MertonParams& p, double tau) {
    p.validate();
    LogReturnLaw law;
    law.cf = [p, tau](double z) { return merton_cf(std::complex<double>(z, 0.0), tau, p); };
    law.cumulants = merton_cumulants(tau, p, Measure::RiskNeutral);
    return law;
}

LogReturnLaw equity_law(const ModelSpec& model, double tau) {
    if (const auto* bs = std::get_if<BlackScholesParams>(&model)) return bs_law(*bs, tau);
    if (const auto* mj = std::get_if<MertonParams>(&model)) return merton_law(*mj, tau);
    throw ConfigurationError("equity_law: the model has no equity log-return");
}

double cos_european(const LogReturnLaw& law, double s, double strike, double r, double tau, OptionKind kind,
                    const CosConfig& config, double knockout_log_level, CosDiagnostics* diag) {
    if (tau < 0.0) throw ParameterError("cos_european: tau must be >= 0");
    if (config.terms < 2) throw ParameterError("cos_european: need at least two terms");
    const auto& c = law.cumulants;
    const double spread = config.truncation_l * std::sqrt(std::max(c.c2, 0.0) + std::sqrt(std::max(c.c4, 0.0)));
    const double df = std::exp(-r * tau);
    const double kx = std::log(strike / s);
    if (tau == 0.0 || !(spread > 1e-12)) {
        // point mass at the mean log-return
        const double y = tau == 0.0 ? 0.0 : c.c1;
        if (diag) *diag = {};
        return y > knockout_log_level ? 0.0 : df * intrinsic(s * std::exp(y), strike, kind);
    }
    const double a = c.c1 - spread;
    const double b = c.c1 + spread;
    const double omega = std::numbers::pi / (b - a);

    double lo;
    double hi;
    double sign;
    if (kind == OptionKind::Put) {
        lo = a;
        hi = std::min({kx, b, knockout_log_level});
        sign = -1.0;
    } else {
        lo = std::max(kx, a);
        hi = std::min(b, knockout_log_level);
        sign = 1.0;
    }

    double sum = 0.0;
    double last_term = 0.0;
    for (std::size_t k = 0; k < config.terms; ++k) {
        const double ko = omega * static_cast<double>(k);
        const double vk = cos_detail::payoff_coeff(ko, a, b, lo, hi, s, strike, sign);
        const double term = (law.cf(ko) * std::polar(1.0, -ko * a)).real() * vk;
        last_term = term;
        sum += k == 0 ? 0.5 * term : term;
    }
    if (diag) {
        diag->tail = std::fabs(last_term);
        diag->converged = diag->tail <= 1e-10;
    }
    return df * sum;
}

AnalyticEuropeanValuer::AnalyticEuropeanValuer(const BlackScholesParams& p, const EuropeanSpec& spec,
                                               std::vector<double> grid)
    : params_(p), spec_(spec), grid_(std::move(grid)) {
    p.validate();
}

void AnalyticEuropeanValuer::held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const {
    const double tau = std::max(spec_.maturity - grid_[u], 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[i] = bs_european(params_.s0 * std::exp(xs[i]), spec_.strike, params_.r, params_.sigma, tau, spec_.kind);
    }
}

ExposureProfile full_reevaluation_exposure(const PathValuer& reference, const PathEnsemble& ensemble,
                                           const Product& product, const ModelSpec& model,
                                           const ExposureOptions& options) {
    ExposureOptions opts = options;
    opts.method = "full_reeval";
    return compute_exposure(reference, ensemble, product, model, opts);
}

ProfileError profile_error(const ExposureProfile& a, const ExposureProfile& b, double normalizer) {
    if (a.times.size() != b.times.size()) throw ConfigurationError("profile_error: time grids differ");
    for (std::size_t u = 0; u < a.times.size(); ++u) {
        if (std::fabs(a.times[u] - b.times[u]) > 1e-12) throw ConfigurationError("profile_error: time grids differ");
    }
    if (!(normalizer > 0.0)) throw ParameterError("profile_error: normalizer must be > 0");
    ProfileError e;
    for (std::size_t u = 0; u < a.times.size(); ++u) {
        e.ee = std::max(e.ee, std::fabs(a.ee[u] - b.ee[u]) / normalizer);
        e.pfe = std::max(e.pfe, std::fabs(a.pfe[u] - b.pfe[u]) / normalizer);
    }
    return e;
}

}  // namespace dce
