#pragma once

// Payoffs, dynamic-programming combine rules and schedules.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dce/chebyshev.hpp"
#include "dce/models.hpp"

namespace dce {

enum class OptionKind { Call, Put };

struct EuropeanSpec {
    OptionKind kind = OptionKind::Put;
    double strike = 100.0;
    double maturity = 1.0;
};

struct BermudanSpec {
    OptionKind kind = OptionKind::Put;
    double strike = 100.0;
    double maturity = 1.0;
    std::vector<double> exercise_dates;
};

struct BarrierUpOutSpec {
    OptionKind kind = OptionKind::Call;
    double strike = 100.0;
    double barrier = 130.0;
    double maturity = 1.0;
    std::vector<double> monitoring_dates;
};

struct SwaptionSpec {
    bool receiver = true;
    double fixed_rate = 0.01094;
    double notional = 100.0;
    std::vector<double> exercise_dates;
    std::vector<double> payment_dates;
};

using ProductSpec = std::variant<EuropeanSpec, BermudanSpec, BarrierUpOutSpec, SwaptionSpec>;

enum class CombineRule { TakeMax, Continuation, ContinuationWithKnockout };

struct DPStep {
    bool is_decision_date = false;
    CombineRule combine = CombineRule::Continuation;
};

/// A product bound to the market data its payoff needs (spot and rate for
/// equity, bond-pricing parameters for the swaption).
class Product {
  public:
    Product(ProductSpec spec, const ModelSpec& model);

    const ProductSpec& spec() const noexcept { return spec_; }
    std::string name() const;
    double maturity() const noexcept { return maturity_; }

    bool has_early_exercise() const noexcept;
    bool has_knockout() const noexcept;
    bool is_swaption() const noexcept;
    bool is_equity() const noexcept { return !is_swaption(); }

    /// Decision (exercise or monitoring) dates, sorted.
    const std::vector<double>& decision_dates() const noexcept { return dates_; }
    bool is_decision_date(double t) const noexcept;
    DPStep step(double t) const noexcept;

    /// Grid indices of the decision dates; ScheduleError if a date is off-grid
    /// or the grid does not end at maturity.
    std::vector<bool> decision_mask(const std::vector<double>& grid) const;

    /// Payoff g(t, x). Throws ScheduleError when t is not a date at which the
    /// payoff can be received.
    double payoff(double t, double x) const;
    /// Payoff without the schedule check.
    double intrinsic(double t, double x) const noexcept;
    double terminal_value(double x) const noexcept;
    double dp_combine(double t, double intrinsic, double continuation, double x) const noexcept;

    /// log(B / S0) for barrier products.
    double log_barrier() const noexcept { return log_barrier_; }
    double s0() const noexcept { return s0_; }
    double strike() const noexcept;
    double rate() const noexcept { return rate_; }

    /// Value assigned to a point outside the interpolation domain. `held`
    /// selects the continuation value at decision dates instead of the
    /// option value.
    double extrapolate(double t, double x, const Domain& domain, bool held) const noexcept;
    /// Swaption rule: evaluate the interpolant at the nearest domain edge.
    bool clamps_outside() const noexcept { return is_swaption(); }

  private:
    ProductSpec spec_;
    std::optional<HullWhiteParams> hw_;
    double s0_ = 100.0;
    double rate_ = 0.0;
    double maturity_ = 0.0;
    double log_barrier_ = 0.0;
    std::vector<double> dates_;
};

/// Receiver swap value per unit notional at exercise date t, state x.
double receiver_swap_value(double x, double t, double fixed_rate, const std::vector<double>& payment_dates,
                           const HullWhiteParams& p);

/// Fixed rate making the swap starting at `start` worth zero at x = 0.
double par_swap_rate(double start, const std::vector<double>& payment_dates, const HullWhiteParams& p);

/// Yearly exercise dates 1..maturity and payments 2..maturity+1.
SwaptionSpec yearly_swaption(double fixed_rate, double notional, int maturity_years);

/// Equally spaced dates dt, 2dt, ..., maturity.
std::vector<double> uniform_dates(double maturity, std::size_t count);

}  // namespace dce
