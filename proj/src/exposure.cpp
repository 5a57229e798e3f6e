#include "dce/exposure.hpp"

#include <algorithm>
#include <cmath>

#include "dce/errors.hpp"
#include "dce/parallel.hpp"

namespace dce {

namespace {

constexpr std::size_t kSumBlock = 256;

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= kSumBlock) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

}  // namespace

double pfe_quantile(std::span<const double> sample, double alpha) {
    if (sample.empty()) throw DataError("pfe_quantile: empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("pfe_quantile: alpha must lie in (0, 1)");
    const double m = static_cast<double>(sample.size());
    // guard against M * alpha landing a hair above an integer
    auto k = static_cast<std::size_t>(std::ceil(m * alpha - 1e-9));
    k = std::clamp<std::size_t>(k, 1, sample.size());
    std::vector<double> copy(sample.begin(), sample.end());
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(k - 1), copy.end());
    return copy[k - 1];
}

double deterministic_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return pairwise_sum(values.data(), values.size()) / static_cast<double>(values.size());
}

ExposureAccumulator::ExposureAccumulator(const Product& product, const std::vector<double>& grid, std::size_t paths,
                                         Measure measure, const ExposureOptions& options)
    : product_(product), decision_(product.decision_mask(grid)), paths_(paths) {
    if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ParameterError("exposure: alpha must lie in (0, 1)");
    if (paths == 0) throw ParameterError("exposure: no paths");
    profile_.times = grid;
    profile_.alpha = options.alpha;
    profile_.measure = measure;
    profile_.method = options.method;
    profile_.paths = paths;
    const std::size_t n = grid.size();
    profile_.ee.assign(n, 0.0);
    profile_.pfe.assign(n, 0.0);
    profile_.ee_stderr.assign(n, 0.0);
    profile_.alive_counts.assign(n, 0);
    if (options.retain_matrix) profile_.exposure_matrix.assign(n * paths, 0.0);
    alive_.assign(paths, 1);
    scratch_.resize(paths);
}

void ExposureAccumulator::step(std::size_t u, std::span<const double> xs, std::span<const double> held,
                               std::span<const double> discount) {
    if (u != next_u_) throw ConfigurationError("exposure: time steps must be fed in order");
    if (xs.size() != paths_ || held.size() != paths_) throw ConfigurationError("exposure: batch size mismatch");
    if (!discount.empty() && discount.size() != paths_) throw ConfigurationError("exposure: discount size mismatch");
    ++next_u_;

    const double t = profile_.times[u];
    const bool decision = decision_[u];
    const bool exercise = decision && product_.has_early_exercise();
    const bool monitor = decision && product_.has_knockout();
    const double barrier = product_.log_barrier();
    if (!discount.empty()) profile_.discounted = true;

    std::size_t alive_after = 0;
    for (std::size_t i = 0; i < paths_; ++i) {
        double e = 0.0;
        if (alive_[i]) {
            const double x = xs[i];
            double v = held[i];
            if (monitor && x > barrier) {
                v = 0.0;
                alive_[i] = 0;
            } else if (exercise) {
                const double g = product_.intrinsic(t, x);
                // ties go to exercise
                if (g > 0.0 && g >= v) {
                    v = g;
                    alive_[i] = 0;
                }
            }
            e = std::max(v, 0.0);
            if (!discount.empty()) e *= discount[i];
        }
        scratch_[i] = e;
        alive_after += alive_[i];
    }

    profile_.alive_counts[u] = alive_after;
    const double mean = deterministic_mean(scratch_);
    profile_.ee[u] = mean;
    if (paths_ > 1) {
        double ss = 0.0;
        for (double e : scratch_) ss += (e - mean) * (e - mean);
        profile_.ee_stderr[u] = std::sqrt(ss / static_cast<double>(paths_ - 1) / static_cast<double>(paths_));
    }
    if (!profile_.exposure_matrix.empty()) {
        std::copy(scratch_.begin(), scratch_.end(), profile_.exposure_matrix.begin() + static_cast<std::ptrdiff_t>(u * paths_));
    }
    profile_.pfe[u] = pfe_quantile(scratch_, profile_.alpha);
}

ExposureProfile ExposureAccumulator::finish() {
    if (next_u_ != profile_.times.size()) throw ConfigurationError("exposure: not all time steps were processed");
    return std::move(profile_);
}

ExposureProfile compute_exposure(const PathValuer& valuer, const PathEnsemble& ensemble, const Product& product,
                                 const ModelSpec& model, const ExposureOptions& options) {
    const auto& grid = valuer.grid();
    if (grid.size() != ensemble.grid.size()) throw ConfigurationError("exposure: ensemble grid does not match value functions");
    for (std::size_t u = 0; u < grid.size(); ++u) {
        if (std::fabs(grid[u] - ensemble.grid[u]) > 1e-12) {
            throw ConfigurationError("exposure: ensemble grid does not match value functions");
        }
    }

    std::vector<double> discount;
    if (ensemble.measure == Measure::RiskNeutral) discount = pathwise_discount(ensemble, model);

    ExposureAccumulator acc(product, grid, ensemble.paths, ensemble.measure, options);
    std::vector<double> held(ensemble.paths);
    for (std::size_t u = 0; u < grid.size(); ++u) {
        const auto xs = ensemble.at(u);
        parallel_for(ensemble.paths, [&](std::size_t begin, std::size_t end) {
            valuer.held_value(u, xs.subspan(begin, end - begin), std::span<double>(held).subspan(begin, end - begin));
        }, 1024);
        std::span<const double> d;
        if (!discount.empty()) d = std::span<const double>(discount).subspan(u * ensemble.paths, ensemble.paths);
        acc.step(u, xs, held, d);
    }
    return acc.finish();
}

double cva_from_profile(const ExposureProfile& profile, std::span<const double> default_probs, double recovery) {
    const std::size_t n = profile.ee.size();
    if (default_probs.size() != n && default_probs.size() + 1 != n) {
        throw DataError("cva: default probabilities must have one entry per time bucket");
    }
    if (!(recovery >= 0.0 && recovery <= 1.0)) throw ParameterError("cva: recovery must lie in [0, 1]");
    const std::size_t offset = n - default_probs.size();
    double total = 0.0;
    for (double q : default_probs) {
        if (!(q >= 0.0)) throw DataError("cva: default probabilities must be non-negative");
        total += q;
    }
    if (total > 1.0 + 1e-12) throw DataError("cva: default probabilities sum above 1");
    double cva = 0.0;
    for (std::size_t i = 0; i < default_probs.size(); ++i) cva += profile.ee[i + offset] * default_probs[i];
    return (1.0 - recovery) * cva;
}

}  // namespace dce
