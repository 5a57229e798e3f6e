#pragma once

// Pathwise exposure aggregation shared by every pricing method.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dce/models.hpp"
#include "dce/products.hpp"

namespace dce {

/// Source of option values along paths.
///
/// held_value(u, ...) is the value the holder keeps at grid time t_u if the
/// option is still alive and not exercised there: the continuation value at
/// early-exercise dates, the option value at every other date. At maturity
/// this is the payoff (or zero continuation when maturity is an exercise date).
class PathValuer {
  public:
    virtual ~PathValuer() = default;
    virtual const std::vector<double>& grid() const = 0;
    virtual void held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const = 0;
};

struct ExposureOptions {
    double alpha = 0.975;
    bool retain_matrix = false;
    std::string method = "dc";
};

struct ExposureProfile {
    std::vector<double> times;
    std::vector<double> ee;
    std::vector<double> pfe;
    std::vector<double> ee_stderr;  // standard error of the pathwise mean
    std::vector<std::size_t> alive_counts;
    double alpha = 0.975;
    Measure measure = Measure::RiskNeutral;
    bool discounted = false;
    std::string method;
    std::size_t paths = 0;
    std::vector<double> exposure_matrix;  // time-major, empty unless retained

    double exposure(std::size_t path, std::size_t u) const { return exposure_matrix[u * paths + path]; }
};

/// Smallest sample value y with #{E <= y} / M >= alpha, i.e. the
/// ceil(M alpha)-th order statistic.
double pfe_quantile(std::span<const double> sample, double alpha);

/// Mean with a fixed pairwise summation tree, independent of threading.
double deterministic_mean(std::span<const double> values);

/// Step-by-step exposure bookkeeping: exercise, knockout, absorption and
/// discounting. Feed the time steps in increasing order.
class ExposureAccumulator {
  public:
    ExposureAccumulator(const Product& product, const std::vector<double>& grid, std::size_t paths, Measure measure,
                        const ExposureOptions& options);

    /// xs: risk factor at t_u; held: held values from a PathValuer; discount:
    /// D(0, t_u) per path, empty for undiscounted exposures.
    void step(std::size_t u, std::span<const double> xs, std::span<const double> held,
              std::span<const double> discount);

    const std::vector<unsigned char>& alive() const noexcept { return alive_; }
    ExposureProfile finish();

  private:
    const Product& product_;
    std::vector<bool> decision_;
    std::size_t paths_;
    ExposureProfile profile_;
    std::vector<unsigned char> alive_;
    std::vector<double> scratch_;
    std::size_t next_u_ = 0;
};

/// Exposure profile from a valuer on an ensemble. Under the pricing measure
/// exposures are discounted pathwise (EE^price); under the real-world
/// measure they are not (EE^risk).
ExposureProfile compute_exposure(const PathValuer& valuer, const PathEnsemble& ensemble, const Product& product,
                                 const ModelSpec& model, const ExposureOptions& options = {});

/// CVA = (1 - recovery) sum_u EE^price(t_u) q_u with q_u = P(tau in (t_{u-1}, t_u]).
double cva_from_profile(const ExposureProfile& profile, std::span<const double> default_probs, double recovery = 0.0);

}  // namespace dce
