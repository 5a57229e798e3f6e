#include "dce/products.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dce/errors.hpp"

namespace dce {

namespace {

constexpr double kDateTol = 1e-9;

bool same_date(double a, double b) { return std::fabs(a - b) <= kDateTol * std::max(1.0, std::fabs(b)); }

double equity_payoff(OptionKind kind, double strike, double s0, double x) {
    const double s = s0 * std::exp(x);
    return kind == OptionKind::Put ? std::max(strike - s, 0.0) : std::max(s - strike, 0.0);
}

void check_dates(const std::vector<double>& dates, double maturity, const char* what) {
    if (dates.empty()) throw ScheduleError(std::string(what) + ": no dates");
    for (std::size_t i = 0; i < dates.size(); ++i) {
        if (!(dates[i] > 0.0)) throw ScheduleError(std::string(what) + ": dates must be > 0");
        if (i > 0 && !(dates[i] > dates[i - 1])) throw ScheduleError(std::string(what) + ": dates must increase");
    }
    if (!same_date(dates.back(), maturity)) throw ScheduleError(std::string(what) + ": last date must equal maturity");
}

}  // namespace

Product::Product(ProductSpec spec, const ModelSpec& model) : spec_(std::move(spec)) {
    if (const auto* bs = std::get_if<BlackScholesParams>(&model)) {
        s0_ = bs->s0;
        rate_ = bs->r;
    } else if (const auto* mj = std::get_if<MertonParams>(&model)) {
        s0_ = mj->s0;
        rate_ = mj->r;
    } else {
        hw_ = std::get<HullWhiteParams>(model);
        rate_ = hw_->flat_forward;
    }

    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SwaptionSpec>) {
                if (!hw_) throw ConfigurationError("swaption requires the hull_white model");
                if (!(s.notional > 0.0)) throw ParameterError("swaption: notional must be > 0");
                if (s.exercise_dates.empty()) throw ScheduleError("swaption: no exercise dates");
                maturity_ = s.exercise_dates.back();
                check_dates(s.exercise_dates, maturity_, "swaption exercise");
                if (s.payment_dates.empty() || !(s.payment_dates.front() > s.exercise_dates.front())) {
                    throw ScheduleError("swaption: payment dates must follow the first exercise date");
                }
                if (!(s.payment_dates.back() > maturity_)) {
                    throw ScheduleError("swaption: last payment must follow the last exercise date");
                }
                dates_ = s.exercise_dates;
            } else {
                if (hw_) throw ConfigurationError("equity products require an equity model");
                if (!(s.strike > 0.0)) throw ParameterError("product: strike must be > 0");
                if (!(s.maturity > 0.0)) throw ParameterError("product: maturity must be > 0");
                maturity_ = s.maturity;
                if constexpr (std::is_same_v<T, BermudanSpec>) {
                    check_dates(s.exercise_dates, maturity_, "bermudan exercise");
                    dates_ = s.exercise_dates;
                } else if constexpr (std::is_same_v<T, BarrierUpOutSpec>) {
                    if (!(s.barrier > s.strike) && s.kind == OptionKind::Call) {
                        throw ParameterError("up-and-out call: barrier must exceed the strike");
                    }
                    if (!(s.barrier > s0_)) throw ParameterError("up-and-out: barrier must exceed the spot");
                    check_dates(s.monitoring_dates, maturity_, "barrier monitoring");
                    dates_ = s.monitoring_dates;
                    log_barrier_ = std::log(s.barrier / s0_);
                }
            }
        },
        spec_);
}

std::string Product::name() const {
    switch (spec_.index()) {
        case 0: return "european";
        case 1: return "bermudan";
        case 2: return "barrier_up_out";
        default: return "swaption";
    }
}

bool Product::has_early_exercise() const noexcept {
    return std::holds_alternative<BermudanSpec>(spec_) || std::holds_alternative<SwaptionSpec>(spec_);
}

bool Product::has_knockout() const noexcept { return std::holds_alternative<BarrierUpOutSpec>(spec_); }

bool Product::is_swaption() const noexcept { return std::holds_alternative<SwaptionSpec>(spec_); }

double Product::strike() const noexcept {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SwaptionSpec>) {
                return s.fixed_rate;
            } else {
                return s.strike;
            }
        },
        spec_);
}

bool Product::is_decision_date(double t) const noexcept {
    return std::any_of(dates_.begin(), dates_.end(), [t](double d) { return same_date(t, d); });
}

DPStep Product::step(double t) const noexcept {
    if (!is_decision_date(t)) return {false, CombineRule::Continuation};
    if (has_knockout()) return {true, CombineRule::ContinuationWithKnockout};
    return {true, CombineRule::TakeMax};
}

std::vector<bool> Product::decision_mask(const std::vector<double>& grid) const {
    if (grid.empty() || !same_date(grid.back(), maturity_)) {
        throw ScheduleError("time grid must end at the product maturity");
    }
    std::vector<bool> mask(grid.size(), false);
    for (double d : dates_) {
        auto it = std::find_if(grid.begin(), grid.end(), [d](double t) { return same_date(t, d); });
        if (it == grid.end()) {
            std::ostringstream msg;
            msg << "date " << d << " is not on the time grid";
            throw ScheduleError(msg.str());
        }
        mask[static_cast<std::size_t>(it - grid.begin())] = true;
    }
    return mask;
}

double Product::intrinsic(double t, double x) const noexcept {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SwaptionSpec>) {
                double v = receiver_swap_value(x, t, s.fixed_rate, s.payment_dates, *hw_);
                if (!s.receiver) v = -v;
                return s.notional * std::max(v, 0.0);
            } else {
                return equity_payoff(s.kind, s.strike, s0_, x);
            }
        },
        spec_);
}

double Product::payoff(double t, double x) const {
    const bool at_maturity = same_date(t, maturity_);
    if (!at_maturity && (!has_early_exercise() || !is_decision_date(t))) {
        std::ostringstream msg;
        msg << name() << ": no payoff at t = " << t;
        throw ScheduleError(msg.str());
    }
    return intrinsic(t, x);
}

double Product::terminal_value(double x) const noexcept {
    if (has_knockout() && x > log_barrier_) return 0.0;
    return intrinsic(maturity_, x);
}

double Product::dp_combine(double t, double g, double continuation, double x) const noexcept {
    switch (step(t).combine) {
        case CombineRule::TakeMax: return std::max(g, continuation);
        case CombineRule::ContinuationWithKnockout: return x <= log_barrier_ ? continuation : 0.0;
        case CombineRule::Continuation: break;
    }
    return continuation;
}

double Product::extrapolate(double t, double x, const Domain& domain, bool held) const noexcept {
    const bool below = x < domain.lower;
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SwaptionSpec>) {
                return 0.0;
            } else {
                const double tau = maturity_ - t;
                const double fwd = s0_ * std::exp(x) - s.strike * std::exp(-rate_ * tau);
                const bool deep_itm = (s.kind == OptionKind::Put) == below;
                if constexpr (std::is_same_v<T, EuropeanSpec>) {
                    // put-call parity: the out-of-money leg is worth nothing
                    if (!deep_itm) return 0.0;
                    return s.kind == OptionKind::Put ? std::max(-fwd, 0.0) : std::max(fwd, 0.0);
                } else if constexpr (std::is_same_v<T, BermudanSpec>) {
                    if (!deep_itm) return 0.0;
                    // deep in the money: exercise, so the continuation is dominated
                    return held ? 0.0 : equity_payoff(s.kind, s.strike, s0_, x);
                } else {
                    if (!below || s.kind == OptionKind::Call) return 0.0;
                    return std::max(-fwd, 0.0);
                }
            }
        },
        spec_);
}

double receiver_swap_value(double x, double t, double fixed_rate, const std::vector<double>& payment_dates,
                           const HullWhiteParams& p) {
    double fixed = 0.0;
    double prev = t;
    double last = t;
    for (double tau : payment_dates) {
        if (tau <= t + kDateTol) continue;
        fixed += (tau - prev) * hw_zcb(x, t, tau, p);
        prev = tau;
        last = tau;
    }
    if (last == t) return 0.0;
    return fixed_rate * fixed + hw_zcb(x, t, last, p) - 1.0;
}

double par_swap_rate(double start, const std::vector<double>& payment_dates, const HullWhiteParams& p) {
    double annuity = 0.0;
    double prev = start;
    double last = start;
    for (double tau : payment_dates) {
        if (tau <= start + kDateTol) continue;
        annuity += (tau - prev) * hw_zcb(0.0, start, tau, p);
        prev = tau;
        last = tau;
    }
    if (annuity == 0.0) throw ScheduleError("par_swap_rate: no payments after the start date");
    return (1.0 - hw_zcb(0.0, start, last, p)) / annuity;
}

SwaptionSpec yearly_swaption(double fixed_rate, double notional, int maturity_years) {
    if (maturity_years < 1) throw ParameterError("yearly_swaption: maturity must be >= 1 year");
    SwaptionSpec s;
    s.receiver = true;
    s.fixed_rate = fixed_rate;
    s.notional = notional;
    for (int y = 1; y <= maturity_years; ++y) s.exercise_dates.push_back(y);
    for (int y = 2; y <= maturity_years + 1; ++y) s.payment_dates.push_back(y);
    return s;
}

std::vector<double> uniform_dates(double maturity, std::size_t count) {
    if (count == 0) throw ParameterError("uniform_dates: count must be >= 1");
    std::vector<double> d(count);
    for (std::size_t i = 0; i < count; ++i) d[i] = maturity * static_cast<double>(i + 1) / static_cast<double>(count);
    d.back() = maturity;
    return d;
}

}  // namespace dce
