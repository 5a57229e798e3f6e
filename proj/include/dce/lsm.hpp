#pragma once

// Least-squares Monte Carlo baseline: regression estimates of the held value
// at each grid time, fitted on a separate pricing ensemble.

#include <cstdint>
#include <span>
#include <vector>

#include "dce/chebyshev.hpp"
#include "dce/exposure.hpp"
#include "dce/models.hpp"
#include "dce/products.hpp"

namespace dce {

struct LsmConfig {
    std::size_t pricing_paths = 150000;
    std::uint64_t seed = 987654321;  // pricing ensemble, keep distinct from exposure seeds
    std::size_t degree = 0;          // monomial degree; 0 picks 5 for equity, 3 for swaptions
    double domain_k = 5.0;           // scaling interval for the monomials

    void validate() const;
};

/// Basis functions: monomials z^0..z^d of z = tau^-1(x), the payoff g(t, x)
/// and, for barrier products, g(t, x) 1{x <= log barrier}.
std::size_t lsm_basis_size(const Product& product, std::size_t degree);
void lsm_basis(const Product& product, const Domain& scaling, std::size_t degree, double t, double x,
               std::span<double> out);

struct LsmValueFunctions {
    std::vector<double> grid;
    Domain scaling{-1.0, 1.0};
    std::size_t degree = 5;
    std::vector<std::vector<double>> beta;  // per grid time; dropped columns carry 0
    double price = 0.0;
    double simulate_seconds = 0.0;
    double regress_seconds = 0.0;
};

/// Backward regression on a pricing ensemble simulated under the pricing
/// measure. Regression uses every path still alive (no in-the-money filter).
LsmValueFunctions lsm_value_functions(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                      const LsmConfig& config = {});

class LsmValuer : public PathValuer {
  public:
    LsmValuer(const LsmValueFunctions& vf, const Product& product) : vf_(vf), product_(product) {}
    const std::vector<double>& grid() const override { return vf_.grid; }
    void held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const override;

  private:
    const LsmValueFunctions& vf_;
    const Product& product_;
};

/// Exposure profile tagged method = "lsm".
ExposureProfile lsm_exposure(const LsmValueFunctions& vf, const Product& product, const PathEnsemble& ensemble,
                             const ModelSpec& model, const ExposureOptions& options = {});

}  // namespace dce
