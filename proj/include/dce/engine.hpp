#pragma once

// Dynamic Chebyshev backward induction and Chebyshev-based exposure.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dce/chebyshev.hpp"
#include "dce/exposure.hpp"
#include "dce/models.hpp"
#include "dce/moments.hpp"
#include "dce/products.hpp"

namespace dce {

/// Either a single Chebyshev interpolant or a split pair.
class Interpolant {
  public:
    explicit Interpolant(ChebApprox single) : single_(std::move(single)) {}
    explicit Interpolant(SplitApprox split) : split_(std::move(split)) {}

    double operator()(double x) const noexcept { return split_ ? (*split_)(x) : (*single_)(x); }
    void evaluate(std::span<const double> xs, std::span<double> out) const;
    Interpolant derivative() const;
    Domain domain() const;

    bool is_split() const noexcept { return split_.has_value(); }
    const ChebApprox* single() const noexcept { return single_ ? &*single_ : nullptr; }
    const SplitApprox* split() const noexcept { return split_ ? &*split_ : nullptr; }

  private:
    std::optional<ChebApprox> single_;
    std::optional<SplitApprox> split_;
};

struct EngineConfig {
    std::size_t degree = 128;
    double domain_k = 5.0;
    bool split = false;
    std::size_t split_left = 0;   // 0: degree / 2
    std::size_t split_right = 0;  // 0: degree / 2
    std::optional<double> split_point;  // default: log(K / S0) for equity
    bool smoothing = true;
    double alpha = 0.975;
    bool real_world_domain = true;  // widen the domain to cover the P-ensemble
    CfQuadratureConfig cf;

    void validate() const;
};

/// [mu_T - k sigma_T, mu_T + k sigma_T], the union over both measures when
/// include_real_world is set; barrier products cap the upper bound at log(B/S0).
Domain select_domain(const ModelSpec& model, const Product& product, double horizon, double k,
                     bool include_real_world = true);

/// Chebyshev nodes of one (possibly split) layout, in the order nodal values
/// are stored: the whole node set, or left nodes followed by right nodes.
struct NodeLayout {
    Domain domain{-1.0, 1.0};
    std::vector<double> nodes;
    bool split = false;
    std::size_t left_degree = 0;  // unsplit: the degree
    std::size_t right_degree = 0;
    double split_point = 0.0;

    std::size_t size() const noexcept { return nodes.size(); }
    Interpolant fit(std::span<const double> nodal) const;
    /// Coefficients stacked in the same order as the nodes.
    std::vector<double> stacked_coeffs(const Interpolant& f) const;
};

NodeLayout make_layout(const Domain& domain, const EngineConfig& config, const Product& product);

/// One-step operator of the model on a layout: rows are start nodes, columns
/// the stacked basis (so continuation = gamma * stacked coefficients).
RowMatrix step_moment_matrix(const ModelSpec& model, const NodeLayout& layout, double dt,
                             const CfQuadratureConfig& cf = {});

struct ValueFunctionSet {
    std::vector<double> grid;
    std::vector<bool> decision;
    std::vector<Interpolant> value;                      // V_hat at each t_u
    std::vector<std::optional<Interpolant>> continuation;  // at early-exercise dates
    Domain domain{-1.0, 1.0};
    bool early_exercise = false;

    const Interpolant& held(std::size_t u) const;
    double price() const { return value.front()(0.0); }
};

/// Exact value over one step dt of receiving the product's terminal value,
/// discounted; used for the smoothing step. BS closed forms, COS for Merton.
double one_step_value(const ModelSpec& model, const Product& product, double x, double dt);

struct InductionTiming {
    double precompute_seconds = 0.0;
    double induct_seconds = 0.0;
};

/// Backward induction on the grid. `gamma` may be passed to reuse a
/// pre-computed step operator (it must match the layout).
ValueFunctionSet backward_induction(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                    const EngineConfig& config, const RowMatrix* gamma = nullptr,
                                    InductionTiming* timing = nullptr);

/// Same, on an explicit layout (domain chosen by the caller).
ValueFunctionSet backward_induction(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                    const NodeLayout& layout, const RowMatrix& gamma, bool smoothing);

/// PathValuer over a value-function set, applying the product's
/// out-of-domain policy.
class ChebValuer : public PathValuer {
  public:
    ChebValuer(const ValueFunctionSet& vfs, const Product& product) : vfs_(vfs), product_(product) {}
    const std::vector<double>& grid() const override { return vfs_.grid; }
    void held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const override;

  private:
    const ValueFunctionSet& vfs_;
    const Product& product_;
};

struct GreekProfiles {
    std::size_t paths = 0;
    std::vector<double> delta;  // time-major, d V / d x
    std::vector<double> gamma;  // d^2 V / d x^2
};

/// Delta and Gamma in the risk factor x, evaluated along the paths.
GreekProfiles greek_profiles(const ValueFunctionSet& vfs, const PathEnsemble& ensemble);

/// Convert x-derivatives of an equity value function to spot derivatives:
/// dV/dS = V_x / S, d2V/dS2 = (V_xx - V_x) / S^2.
double x_to_spot_delta(double dv_dx, double spot);
double x_to_spot_gamma(double dv_dx, double d2v_dx2, double spot);

struct MultiProductStats {
    std::uint64_t basis_evaluations = 0;  // number of T_j(x) vectors built
};

/// Exposure profiles of several products on one underlying. All value
/// functions must share the same unsplit layout; the Chebyshev basis at each
/// path point is built once and reused for every product.
std::vector<ExposureProfile> multi_product_exposure(const std::vector<const ValueFunctionSet*>& vfs,
                                                    const std::vector<const Product*>& products,
                                                    const PathEnsemble& ensemble, const ModelSpec& model,
                                                    const ExposureOptions& options = {},
                                                    MultiProductStats* stats = nullptr);

}  // namespace dce
