#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "dce/errors.hpp"
#include "dce/moments.hpp"

namespace dce {

namespace {

constexpr std::size_t kMaxDegree = 2048;
constexpr double kQuadratureStd = 1e-4;
constexpr long kMaxBits = 1L << 15;
// Beyond this many standard deviations the normal mass is below 1e-300.
constexpr double kTailCut = 40.0;

// RAII wrapper around an mpfr_t.
class Mp {
  public:
    explicit Mp(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
    ~Mp() { mpfr_clear(v_); }
    Mp(const Mp&) = delete;
    Mp& operator=(const Mp&) = delete;
    mpfr_ptr get() noexcept { return v_; }
    double to_double() const noexcept { return mpfr_get_d(v_, MPFR_RNDN); }

  private:
    mpfr_t v_;
};

void check_args(double mean, double std, std::size_t degree) {
    if (!(std > 0.0) || !std::isfinite(std)) throw ParameterError("truncated normal moments: std must be > 0");
    if (!std::isfinite(mean)) throw ParameterError("truncated normal moments: mean must be finite");
    if (degree < 1) throw ParameterError("truncated normal moments: degree must be >= 1");
    if (degree > kMaxDegree) throw SizeError("truncated normal moments: degree above 2048");
}

bool negligible_mass(double mean, double std) {
    return (mean - 1.0) / std > kTailCut || (-1.0 - mean) / std > kTailCut;
}

std::vector<double> mu_prime_from_mu(const std::vector<double>& mu) {
    // mu'_n = 2n sum'_{j<n, n+j odd} mu_j with the j = 0 term halved
    std::vector<double> out(mu.size(), 0.0);
    double even = 0.0;
    double odd = 0.0;
    for (std::size_t n = 0; n < mu.size(); ++n) {
        out[n] = 2.0 * static_cast<double>(n) * (n % 2 == 0 ? odd : even);
        if (n % 2 == 0) {
            even += n == 0 ? 0.5 * mu[n] : mu[n];
        } else {
            odd += mu[n];
        }
    }
    return out;
}

}  // namespace

long recursion_precision_bits(double mean, double std, std::size_t degree) {
    // Worst-case amplification of a unit perturbation through the recursion.
    const long double m2 = 2.0L * std::fabs(static_cast<long double>(mean));
    const long double s2 = static_cast<long double>(std) * std;
    long double e_prev = 1.0L;
    long double e_cur = 1.0L;
    long double total = 1.0L;
    long double peak = 1.0L;
    for (std::size_t n = 1; n < degree; ++n) {
        const long double next = m2 * e_cur + e_prev + 4.0L * static_cast<long double>(n) * s2 * total;
        total += e_cur;
        e_prev = e_cur;
        e_cur = next;
        peak = std::max(peak, next);
        if (!std::isfinite(static_cast<double>(std::log2(peak)))) return 0;
    }
    const double dn = static_cast<double>(degree);
    const double scale = 1.0 + std::fabs(mean) + 4.0 * dn * dn * std * std;
    const double bits = 53.0 + static_cast<double>(std::log2(peak)) + std::log2(dn + 1.0) + std::log2(scale) + 64.0;
    if (!std::isfinite(bits) || bits > static_cast<double>(kMaxBits)) return 0;
    return static_cast<long>(std::ceil(bits));
}

std::vector<double> truncated_normal_moments_quadrature(double mean, double std, std::size_t degree) {
    check_args(mean, std, degree);
    std::vector<double> mu(degree + 1, 0.0);
    const double ua = std::max((-1.0 - mean) / std, -kTailCut);
    const double ub = std::min((1.0 - mean) / std, kTailCut);
    if (!(ua < ub)) return mu;

    using Rule = boost::math::quadrature::gauss<double, 20>;
    const auto& abscissa = Rule::abscissa();
    const auto& weights = Rule::weights();

    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double dn = static_cast<double>(degree);
    std::vector<double> basis(degree + 1);

    auto accumulate = [&](double u, double w) {
        const double y = std::clamp(mean + std * u, -1.0, 1.0);
        const double dens = w * inv_sqrt_2pi * std::exp(-0.5 * u * u);
        chebyshev_basis(y, basis);
        for (std::size_t j = 0; j <= degree; ++j) mu[j] += dens * basis[j];
    };

    const std::size_t coarse = static_cast<std::size_t>(std::ceil((ub - ua) / 0.5));
    const double h = (ub - ua) / static_cast<double>(coarse);
    for (std::size_t p = 0; p < coarse; ++p) {
        const double u0 = ua + h * static_cast<double>(p);
        const double u1 = u0 + h;
        // Local oscillation of T_N in u grows like N / sqrt(1 - y^2), capped at N^2.
        const double y_edge = std::max(std::fabs(mean + std * u0), std::fabs(mean + std * u1));
        const double gap = std::max(1.0 - std::min(y_edge, 1.0) * std::min(y_edge, 1.0), 0.0);
        const double freq = dn * std::min(dn, gap > 0.0 ? 1.0 / std::sqrt(gap) : dn);
        const std::size_t sub = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h * std * freq / 2.0)));
        const double hs = h / static_cast<double>(sub);
        for (std::size_t q = 0; q < sub; ++q) {
            const double a = u0 + hs * static_cast<double>(q);
            const double mid = a + 0.5 * hs;
            const double half = 0.5 * hs;
            for (std::size_t i = 0; i < abscissa.size(); ++i) {
                accumulate(mid + half * abscissa[i], half * weights[i]);
                if (abscissa[i] != 0.0) accumulate(mid - half * abscissa[i], half * weights[i]);
            }
        }
    }
    return mu;
}

TruncatedMomentSequence truncated_normal_cheb_moments(double mean, double std, std::size_t degree) {
    check_args(mean, std, degree);
    TruncatedMomentSequence out;
    out.mean = mean;
    out.std = std;

    if (negligible_mass(mean, std)) {
        out.mu.assign(degree + 1, 0.0);
        out.mu_prime.assign(degree + 1, 0.0);
        return out;
    }

    const long bits = std < kQuadratureStd ? 0 : recursion_precision_bits(mean, std, degree);
    if (bits == 0) {
        out.mu = truncated_normal_moments_quadrature(mean, std, degree);
        out.mu_prime = mu_prime_from_mu(out.mu);
        return out;
    }

    const mpfr_prec_t prec = static_cast<mpfr_prec_t>(bits);
    Mp m(prec), s(prec), s2(prec), two_s2(prec), two_m(prec), tmp(prec), tmp2(prec), sqrt2(prec);
    Mp f_hi(prec), f_lo(prec), norm(prec), a(prec), b(prec);
    mpfr_set_d(m.get(), mean, MPFR_RNDN);
    mpfr_set_d(s.get(), std, MPFR_RNDN);
    mpfr_sqr(s2.get(), s.get(), MPFR_RNDN);
    mpfr_mul_2ui(two_s2.get(), s2.get(), 1, MPFR_RNDN);
    mpfr_mul_2ui(two_m.get(), m.get(), 1, MPFR_RNDN);
    mpfr_sqrt_ui(sqrt2.get(), 2, MPFR_RNDN);

    // Standardised end points a = (-1 - m)/s, b = (1 - m)/s.
    mpfr_si_sub(a.get(), -1, m.get(), MPFR_RNDN);
    mpfr_div(a.get(), a.get(), s.get(), MPFR_RNDN);
    mpfr_ui_sub(b.get(), 1, m.get(), MPFR_RNDN);
    mpfr_div(b.get(), b.get(), s.get(), MPFR_RNDN);

    // Density values f(1) = phi(b)/s, f(-1) = phi(a)/s.
    mpfr_const_pi(norm.get(), MPFR_RNDN);
    mpfr_mul_2ui(norm.get(), norm.get(), 1, MPFR_RNDN);
    mpfr_sqrt(norm.get(), norm.get(), MPFR_RNDN);
    mpfr_mul(norm.get(), norm.get(), s.get(), MPFR_RNDN);
    auto density = [&](mpfr_ptr dst, mpfr_ptr z) {
        mpfr_sqr(dst, z, MPFR_RNDN);
        mpfr_div_2ui(dst, dst, 1, MPFR_RNDN);
        mpfr_neg(dst, dst, MPFR_RNDN);
        mpfr_exp(dst, dst, MPFR_RNDN);
        mpfr_div(dst, dst, norm.get(), MPFR_RNDN);
    };
    density(f_hi.get(), b.get());
    density(f_lo.get(), a.get());

    // mu_0 = Phi(b) - Phi(a), with erfc on the side that avoids cancellation.
    std::vector<Mp*> mu;
    mu.reserve(degree + 1);
    std::vector<std::unique_ptr<Mp>> store;
    for (std::size_t j = 0; j <= degree; ++j) {
        store.push_back(std::make_unique<Mp>(prec));
        mu.push_back(store.back().get());
    }
    if (mean <= -1.0 || mean >= 1.0) {
        // both end points on the same side of the mean
        const bool upper_tail = mean <= -1.0;  // a >= 0
        Mp ea(prec), eb(prec);
        if (upper_tail) {
            mpfr_div(tmp.get(), a.get(), sqrt2.get(), MPFR_RNDN);
            mpfr_erfc(ea.get(), tmp.get(), MPFR_RNDN);
            mpfr_div(tmp.get(), b.get(), sqrt2.get(), MPFR_RNDN);
            mpfr_erfc(eb.get(), tmp.get(), MPFR_RNDN);
            mpfr_sub(mu[0]->get(), ea.get(), eb.get(), MPFR_RNDN);
        } else {
            mpfr_div(tmp.get(), b.get(), sqrt2.get(), MPFR_RNDN);
            mpfr_neg(tmp.get(), tmp.get(), MPFR_RNDN);
            mpfr_erfc(eb.get(), tmp.get(), MPFR_RNDN);
            mpfr_div(tmp.get(), a.get(), sqrt2.get(), MPFR_RNDN);
            mpfr_neg(tmp.get(), tmp.get(), MPFR_RNDN);
            mpfr_erfc(ea.get(), tmp.get(), MPFR_RNDN);
            mpfr_sub(mu[0]->get(), eb.get(), ea.get(), MPFR_RNDN);
        }
        mpfr_div_2ui(mu[0]->get(), mu[0]->get(), 1, MPFR_RNDN);
    } else {
        // 1 - Q(b) - Phi(a)
        Mp qa(prec), qb(prec);
        mpfr_div(tmp.get(), b.get(), sqrt2.get(), MPFR_RNDN);
        mpfr_erfc(qb.get(), tmp.get(), MPFR_RNDN);
        mpfr_div(tmp.get(), a.get(), sqrt2.get(), MPFR_RNDN);
        mpfr_neg(tmp.get(), tmp.get(), MPFR_RNDN);
        mpfr_erfc(qa.get(), tmp.get(), MPFR_RNDN);
        mpfr_add(tmp.get(), qa.get(), qb.get(), MPFR_RNDN);
        mpfr_div_2ui(tmp.get(), tmp.get(), 1, MPFR_RNDN);
        mpfr_ui_sub(mu[0]->get(), 1, tmp.get(), MPFR_RNDN);
    }

    // mu_1 = m mu_0 - s^2 (f(1) - f(-1))
    mpfr_sub(tmp.get(), f_hi.get(), f_lo.get(), MPFR_RNDN);
    mpfr_mul(tmp.get(), tmp.get(), s2.get(), MPFR_RNDN);
    mpfr_mul(mu[1]->get(), m.get(), mu[0]->get(), MPFR_RNDN);
    mpfr_sub(mu[1]->get(), mu[1]->get(), tmp.get(), MPFR_RNDN);

    // Parity sums over j < n, j = 0 halved.
    Mp even(prec), odd(prec);
    mpfr_div_2ui(even.get(), mu[0]->get(), 1, MPFR_RNDN);
    mpfr_set_zero(odd.get(), 1);

    std::vector<double> mu_prime(degree + 1, 0.0);
    auto record_prime = [&](std::size_t n) {
        mpfr_ptr sum = n % 2 == 0 ? odd.get() : even.get();
        mpfr_mul_ui(tmp2.get(), sum, static_cast<unsigned long>(2 * n), MPFR_RNDN);
        mu_prime[n] = tmp2.to_double();
    };
    mu_prime[0] = 0.0;
    record_prime(1);

    for (std::size_t n = 1; n < degree; ++n) {
        mpfr_ptr sum = n % 2 == 0 ? odd.get() : even.get();
        // inner = f(1) - f(-1) T_n(-1) - 2n S_n
        if (n % 2 == 0) {
            mpfr_sub(tmp.get(), f_hi.get(), f_lo.get(), MPFR_RNDN);
        } else {
            mpfr_add(tmp.get(), f_hi.get(), f_lo.get(), MPFR_RNDN);
        }
        mpfr_mul_ui(tmp2.get(), sum, static_cast<unsigned long>(2 * n), MPFR_RNDN);
        mpfr_sub(tmp.get(), tmp.get(), tmp2.get(), MPFR_RNDN);
        mpfr_mul(tmp.get(), tmp.get(), two_s2.get(), MPFR_RNDN);
        // mu_{n+1} = 2 m mu_n - 2 s^2 inner - mu_{n-1}
        mpfr_mul(tmp2.get(), two_m.get(), mu[n]->get(), MPFR_RNDN);
        mpfr_sub(tmp2.get(), tmp2.get(), tmp.get(), MPFR_RNDN);
        mpfr_sub(mu[n + 1]->get(), tmp2.get(), mu[n - 1]->get(), MPFR_RNDN);

        // S_{n+1} needs mu_n in its parity class
        if (n % 2 == 0) {
            mpfr_add(even.get(), even.get(), mu[n]->get(), MPFR_RNDN);
        } else {
            mpfr_add(odd.get(), odd.get(), mu[n]->get(), MPFR_RNDN);
        }
        record_prime(n + 1);
    }

    out.mu.resize(degree + 1);
    for (std::size_t j = 0; j <= degree; ++j) out.mu[j] = mu[j]->to_double();
    out.mu_prime = std::move(mu_prime);
    return out;
}

}  // namespace dce
