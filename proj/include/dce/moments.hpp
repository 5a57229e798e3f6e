#pragma once

// Conditional expectations of the Chebyshev basis one time step ahead:
//   gamma[k][j] = E[ T_j(tau^-1(X_dt)) 1{X_dt in domain} | X_0 = x_k ].

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dce/chebyshev.hpp"

namespace dce {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TruncatedMomentSequence {
    std::vector<double> mu;        // mu_j = E[T_j(Y) 1{|Y| <= 1}]
    std::vector<double> mu_prime;  // mu'_j = E[T'_j(Y) 1{|Y| <= 1}]
    double mean = 0.0;
    double std = 1.0;
};

/// Generalized moments of Y ~ N(mean, std^2) truncated to [-1, 1], j = 0..degree.
///
/// Runs the three-term recursion in multiple precision. The working precision
/// comes from an a-priori bound on how much the recursion amplifies rounding
/// errors, so the double result carries full accuracy. Very small std (< 1e-4)
/// or a hopeless amplification bound switches to direct quadrature.
TruncatedMomentSequence truncated_normal_cheb_moments(double mean, double std, std::size_t degree);

/// Same moments by composite Gauss-Legendre quadrature. Used as the fallback.
std::vector<double> truncated_normal_moments_quadrature(double mean, double std, std::size_t degree);

/// Bits of working precision the recursion needs for (mean, std, degree);
/// 0 when the bound overflows.
long recursion_precision_bits(double mean, double std, std::size_t degree);

struct MomentMatrix {
    RowMatrix gamma;  // rows: start nodes, columns: basis index
    Domain domain{-1.0, 1.0};
    double dt = 0.0;
    std::string model_tag;

    std::size_t degree() const noexcept { return static_cast<std::size_t>(gamma.cols()) - 1; }
};

// Block builders. Row i conditions on X_0 = starts[i]; the basis lives on
// `target`. Split-domain induction needs blocks whose start nodes and target
// interval differ.

/// X_dt | X_0 = x ~ N(scale * x + shift, variance).
RowMatrix normal_moment_block(std::span<const double> starts, const Domain& target, double scale,
                              double shift, double variance, std::size_t degree);

/// Additive increment given by its characteristic function.
struct CfSpec {
    std::function<std::complex<double>(double)> cf;  // CF of X_dt - X_0
    double c1 = 0.0;                                  // cumulants of the increment
    double c2 = 0.0;
    double c4 = 0.0;
};

struct CfQuadratureConfig {
    double truncation_l = 10.0;
    std::size_t cos_terms = 1024;
    std::size_t panel_points = 17;  // Clenshaw-Curtis points per panel
    bool self_check = true;         // compare sample rows against panel quadrature
    double self_check_tol = 1e-9;
};

RowMatrix cf_moment_block(const CfSpec& spec, std::span<const double> starts, const Domain& target,
                          std::size_t degree, const CfQuadratureConfig& config = {});

// Square matrices on the nodes of one domain.

/// X_dt | X_0 = x ~ N(x + drift, variance).
MomentMatrix normal_moment_matrix(const Domain& domain, double drift, double variance,
                                  std::size_t degree);

/// Ornstein-Uhlenbeck step: N(decay * x, variance).
MomentMatrix ou_moment_matrix(const Domain& domain, double decay, double variance,
                              std::size_t degree);

MomentMatrix cf_moment_matrix(const CfSpec& spec, const Domain& domain, double dt, std::size_t degree,
                              const CfQuadratureConfig& config = {});

using IncrementSampler = std::function<double(std::mt19937_64&)>;

/// Sample average over n_samples draws (n_samples >= 1000), same draws for every row.
MomentMatrix mc_moment_matrix(const IncrementSampler& sampler, const Domain& domain,
                              std::size_t degree, std::size_t n_samples, std::uint64_t seed);

}  // namespace dce
