#pragma once

// Univariate Chebyshev interpolation on an arbitrary interval [lower, upper].
//
// Nodes follow z_k = cos(pi k / N), mapped to the interval by
//   tau(z) = upper + 0.5 (lower - upper)(1 - z),
// so x_0 = upper and x_N = lower (descending order).

#include <cstddef>
#include <span>
#include <vector>

namespace dce {

struct Domain {
    double lower;
    double upper;

    /// Throws DomainError unless lower < upper and both are finite.
    Domain(double lower, double upper);

    double width() const noexcept { return upper - lower; }
    double midpoint() const noexcept { return 0.5 * (lower + upper); }
    bool contains(double x) const noexcept { return x >= lower && x <= upper; }

    /// Map from [-1, 1] onto the interval.
    double from_unit(double z) const noexcept { return upper + 0.5 * (lower - upper) * (1.0 - z); }
    /// Inverse map, onto [-1, 1] for points of the interval.
    double to_unit(double x) const noexcept { return (2.0 * x - (lower + upper)) / (upper - lower); }

    friend bool operator==(const Domain&, const Domain&) = default;
};

/// Chebyshev points x_k = tau(cos(pi k / N)), k = 0..N.
std::vector<double> cheb_nodes(std::size_t degree, const Domain& domain);

/// A Chebyshev series sum_j c_j T_j(tau^-1(x)) on a fixed interval.
class ChebApprox {
  public:
    ChebApprox(Domain domain, std::vector<double> coeffs);

    /// Interpolate values given at cheb_nodes(values.size() - 1, domain).
    static ChebApprox fit(std::span<const double> nodal_values, const Domain& domain);

    /// Clenshaw evaluation. No clamping: points outside the interval are
    /// evaluated on the polynomial continuation.
    double operator()(double x) const noexcept;

    /// Elementwise evaluation; out.size() must equal xs.size().
    void evaluate(std::span<const double> xs, std::span<double> out) const;

    /// Derivative in x, including the 2 / (upper - lower) chain-rule factor.
    ChebApprox derivative() const;

    std::vector<double> coefficient_decay() const;

    const Domain& domain() const noexcept { return domain_; }
    std::span<const double> coeffs() const noexcept { return coeffs_; }
    std::size_t degree() const noexcept { return coeffs_.size() - 1; }

  private:
    Domain domain_;
    std::vector<double> coeffs_;
};

/// Two interpolants glued at split_point. Points x <= split_point belong to
/// the left piece.
class SplitApprox {
  public:
    SplitApprox(ChebApprox left, ChebApprox right);

    double operator()(double x) const noexcept { return x <= split_ ? left_(x) : right_(x); }
    void evaluate(std::span<const double> xs, std::span<double> out) const;
    SplitApprox derivative() const { return {left_.derivative(), right_.derivative()}; }

    double split_point() const noexcept { return split_; }
    const ChebApprox& left() const noexcept { return left_; }
    const ChebApprox& right() const noexcept { return right_; }
    Domain domain() const { return {left_.domain().lower, right_.domain().upper}; }

  private:
    ChebApprox left_;
    ChebApprox right_;
    double split_;
};

/// Chebyshev coefficients from values at the N+1 Chebyshev points.
/// Uses the closed-form discrete cosine sum with halved end terms.
std::vector<double> chebyshev_coefficients(std::span<const double> nodal_values);

/// Clenshaw recurrence at a point already mapped to [-1, 1].
double clenshaw(std::span<const double> coeffs, double z) noexcept;

/// T_0(z), ..., T_{out.size()-1}(z) by the three-term recurrence.
void chebyshev_basis(double z, std::span<double> out) noexcept;

// Free-function spellings of the member operations.
inline ChebApprox fit(std::span<const double> nodal_values, const Domain& domain) {
    return ChebApprox::fit(nodal_values, domain);
}
inline double evaluate(const ChebApprox& approx, double x) { return approx(x); }
std::vector<double> evaluate_batch(const ChebApprox& approx, std::span<const double> xs);
std::vector<double> evaluate_batch(const SplitApprox& approx, std::span<const double> xs);
inline ChebApprox differentiate(const ChebApprox& approx) { return approx.derivative(); }
inline std::vector<double> coefficient_decay(const ChebApprox& approx) {
    return approx.coefficient_decay();
}

}  // namespace dce
