#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "cos_common.hpp"
#include "dce/errors.hpp"
#include "dce/reference.hpp"

namespace dce {

namespace {

using cplx = std::complex<double>;

// Owns fftw_malloc'd buffers and a forward/backward plan pair of length n.
class FftWorkspace {
  public:
    explicit FftWorkspace(std::size_t n) : n_(n) {
        for (auto*& b : buf_) b = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_[0], buf_[1], FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_[0], buf_[1], FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftWorkspace() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        for (auto* b : buf_) fftw_free(b);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;

    std::size_t size() const noexcept { return n_; }

    void forward(const std::vector<cplx>& in, std::vector<cplx>& out) { run(fwd_, in, out); }
    // unnormalized inverse
    void backward(const std::vector<cplx>& in, std::vector<cplx>& out) { run(bwd_, in, out); }

  private:
    void run(fftw_plan plan, const std::vector<cplx>& in, std::vector<cplx>& out) {
        std::copy(in.begin(), in.end(), reinterpret_cast<cplx*>(buf_[0]));
        fftw_execute_dft(plan, buf_[0], buf_[1]);
        out.assign(reinterpret_cast<cplx*>(buf_[1]), reinterpret_cast<cplx*>(buf_[1]) + n_);
    }

    std::size_t n_;
    fftw_complex* buf_[2] = {nullptr, nullptr};
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

// Re/Im of sum_j a_j w^j, w = e^{i omega z}, in real arithmetic
cplx horner(const std::vector<cplx>& a, double omega, double z) {
    const double wr = std::cos(omega * z);
    const double wi = std::sin(omega * z);
    double ar = 0.0;
    double ai = 0.0;
    for (std::size_t j = a.size(); j-- > 0;) {
        const double nr = ar * wr - ai * wi + a[j].real();
        ai = ar * wi + ai * wr + a[j].imag();
        ar = nr;
    }
    return {ar, ai};
}

// Cosine coefficients of a continuation series restricted to [x1, x2]:
// C_k = 1/(b-a) Re sum_j A_j [I(j+k) + I(j-k)], I(m) = int e^{i m w z} dz.
class ContinuationCoefficients {
  public:
    ContinuationCoefficients(std::size_t terms, double a, double b)
        : k_(terms), a_(a), b_(b), omega_(std::numbers::pi / (b - a)), fft_(2 * terms) {}

    void set_series(const std::vector<cplx>& series) {
        const std::size_t n = 2 * k_;
        std::vector<cplx> pad(n, 0.0);
        std::copy(series.begin(), series.end(), pad.begin());
        fft_.forward(pad, a_hat_);
        std::fill(pad.begin(), pad.end(), cplx(0.0));
        for (std::size_t i = 0; i < series.size(); ++i) pad[k_ - 1 - i] = series[i];
        fft_.forward(pad, rev_hat_);
    }

    void compute(double x1, double x2, std::vector<double>& out) {
        out.assign(k_, 0.0);
        if (!(x1 < x2)) return;
        const std::size_t n = 2 * k_;
        const double z1 = x1 - a_;
        const double z2 = x2 - a_;
        auto integral = [&](std::ptrdiff_t m) -> cplx {
            if (m == 0) return z2 - z1;
            const double mw = static_cast<double>(m) * omega_;
            return (std::polar(1.0, mw * z2) - std::polar(1.0, mw * z1)) / cplx(0.0, mw);
        };

        std::vector<cplx> c(n, 0.0);
        for (std::size_t d = 0; d < k_; ++d) c[d] = integral(-static_cast<std::ptrdiff_t>(d));
        for (std::size_t m = 1; m < k_; ++m) c[n - m] = integral(static_cast<std::ptrdiff_t>(m));
        std::vector<cplx> h(n);
        for (std::size_t s = 0; s < n; ++s) h[s] = integral(static_cast<std::ptrdiff_t>(s));

        std::vector<cplx> c_hat;
        std::vector<cplx> h_hat;
        fft_.forward(c, c_hat);
        fft_.forward(h, h_hat);
        for (std::size_t i = 0; i < n; ++i) {
            c_hat[i] *= a_hat_[i];
            h_hat[i] *= rev_hat_[i];
        }
        std::vector<cplx> toeplitz;
        std::vector<cplx> hankel;
        fft_.backward(c_hat, toeplitz);
        fft_.backward(h_hat, hankel);
        const double scale = 1.0 / (static_cast<double>(n) * (b_ - a_));
        for (std::size_t k = 0; k < k_; ++k) out[k] = scale * (toeplitz[k].real() + hankel[k + k_ - 1].real());
    }

  private:
    std::size_t k_;
    double a_;
    double b_;
    double omega_;
    FftWorkspace fft_;
    std::vector<cplx> a_hat_;
    std::vector<cplx> rev_hat_;
};

}  // namespace

CosReference cos_backward_reference(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                    const CosBackwardConfig& config) {
    if (!product.is_equity()) throw ConfigurationError("cos_backward_reference: equity products only");
    if (config.terms < 16) throw ParameterError("cos_backward_reference: need at least 16 terms");
    if (grid.size() < 2) throw ScheduleError("cos_backward_reference: grid needs at least two points");

    const std::size_t n = grid.size() - 1;
    const std::size_t kt = config.terms;
    const double horizon = grid.back() - grid.front();
    const auto law_t = equity_law(model, horizon);
    const auto& cu = law_t.cumulants;
    const double spread = config.truncation_l * std::sqrt(std::max(cu.c2, 0.0) + std::sqrt(std::max(cu.c4, 0.0)));
    if (!(spread > 0.0)) throw ParameterError("cos_backward_reference: degenerate law");

    CosReference ref;
    ref.product_ = &product;
    ref.grid_ = grid;
    ref.decision_ = product.decision_mask(grid);
    ref.a_ = cu.c1 - spread;
    const double a = ref.a_;
    const double b = cu.c1 + spread;
    ref.omega_ = std::numbers::pi / (b - a);
    ref.terms_ = kt;
    ref.series_.resize(n);
    ref.boundary_.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    const double omega = ref.omega_;

    const double s0 = product.s0();
    const double strike = product.strike();
    const double r = product.rate();
    const double kx = std::log(strike / s0);
    const auto& spec = product.spec();
    OptionKind kind = OptionKind::Put;
    std::visit([&](const auto& s) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(s)>, SwaptionSpec>) kind = s.kind;
    }, spec);
    const double sign = kind == OptionKind::Put ? -1.0 : 1.0;
    const double ko = product.has_knockout() ? product.log_barrier() : std::numeric_limits<double>::infinity();

    auto payoff_coeffs = [&](double c, double d, std::vector<double>& out) {
        out.assign(kt, 0.0);
        for (std::size_t k = 0; k < kt; ++k) {
            out[k] = cos_detail::payoff_coeff(omega * static_cast<double>(k), a, b, c, d, s0, strike, sign);
        }
    };

    // V_k at maturity
    std::vector<double> v;
    if (kind == OptionKind::Put) {
        payoff_coeffs(a, std::min({kx, b, ko}), v);
    } else {
        payoff_coeffs(std::max(kx, a), std::min(b, ko), v);
    }

    ContinuationCoefficients cont(kt, a, b);
    std::vector<double> tmp;
    for (std::size_t u = n; u-- > 0;) {
        const double dt = grid[u + 1] - grid[u];
        if (!(dt > 0.0)) throw ScheduleError("cos_backward_reference: grid must be increasing");
        const auto law = equity_law(model, dt);
        const double df = std::exp(-r * dt);
        auto& series = ref.series_[u];
        series.resize(kt);
        for (std::size_t j = 0; j < kt; ++j) {
            series[j] = df * law.cf(omega * static_cast<double>(j)) * v[j];
        }
        series[0] *= 0.5;
        while (series.size() > 1 && series.back() == cplx(0.0)) series.pop_back();
        for (const auto& c : series) {
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
                throw NumericalError("cos_backward_reference: non-finite coefficient",
                                     "step " + std::to_string(u));
            }
        }
        if (u == 0) break;

        // coefficients of V(t_u, .) from the continuation series
        cont.set_series(series);
        const double t = grid[u];
        if (!ref.decision_[u]) {
            cont.compute(a, b, v);
        } else if (product.has_knockout()) {
            cont.compute(a, std::min(ko, b), v);
        } else if (product.has_early_exercise()) {
            auto gap = [&](double x) { return product.intrinsic(t, x) - horner(series, omega, x - a).real(); };
            double lo;
            double hi;
            if (kind == OptionKind::Put) {
                lo = a;
                hi = std::min(kx, b);
            } else {
                lo = std::max(kx, a);
                hi = b;
            }
            double boundary;
            if (!(lo < hi)) {
                boundary = kind == OptionKind::Put ? a : b;
            } else if (kind == OptionKind::Put ? gap(lo) <= 0.0 : gap(hi) <= 0.0) {
                boundary = kind == OptionKind::Put ? lo : hi;
            } else if (kind == OptionKind::Put ? gap(hi) > 0.0 : gap(lo) > 0.0) {
                boundary = kind == OptionKind::Put ? hi : lo;
            } else {
                // put: exercise below the root; call: above it
                for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const bool exercise = gap(mid) > 0.0;
                    if ((kind == OptionKind::Put) == exercise) lo = mid; else hi = mid;
                }
                boundary = 0.5 * (lo + hi);
            }
            ref.boundary_[u] = boundary;
            if (kind == OptionKind::Put) {
                payoff_coeffs(a, boundary, v);
                cont.compute(boundary, b, tmp);
            } else {
                payoff_coeffs(boundary, b, v);
                cont.compute(a, boundary, tmp);
            }
            for (std::size_t k = 0; k < kt; ++k) v[k] += tmp[k];
        } else {
            cont.compute(a, b, v);
        }
    }

    // Path evaluation only needs the series up to where the absolute tail sum
    // (a bound on the evaluation error at any x) drops below 1e-12.
    for (auto& series : ref.series_) {
        double tail = 0.0;
        std::size_t keep = series.size();
        while (keep > 1 && tail + std::abs(series[keep - 1]) <= 1e-12) tail += std::abs(series[--keep]);
        series.resize(keep);
    }
    return ref;
}

double CosReference::held(std::size_t u, double x) const {
    const std::size_t n = grid_.size() - 1;
    const double t = grid_[u];
    const Domain dom{a_, a_ + std::numbers::pi / omega_};
    const bool exercise_slot = decision_[u] && product_->has_early_exercise();
    if (u == n) return exercise_slot ? 0.0 : product_->terminal_value(x);
    if (x < dom.lower || x > dom.upper) return product_->extrapolate(t, x, dom, exercise_slot);
    return horner(series_[u], omega_, x - a_).real();
}

void CosReference::held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = held(u, xs[i]);
}

}  // namespace dce
