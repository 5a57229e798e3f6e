#include "dce/lsm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dce/engine.hpp"
#include "dce/errors.hpp"
#include "dce/parallel.hpp"

namespace dce {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t effective_degree(const Product& product, std::size_t degree) {
    if (degree) return degree;
    return product.is_swaption() ? 3 : 5;
}

// Least squares on the columns that carry information. Returns the full
// coefficient vector with zeros for dropped columns.
std::vector<double> regress(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t u) {
    const Eigen::Index p = x.cols();
    std::vector<double> beta(static_cast<std::size_t>(p), 0.0);
    if (x.rows() == 0) return beta;

    std::vector<Eigen::Index> keep;
    std::vector<double> norms;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double nrm = x.col(j).norm();
        if (!(nrm > 0.0)) continue;
        bool duplicate = false;
        for (Eigen::Index k : keep) {
            if (x.col(j) == x.col(k)) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        keep.push_back(j);
        norms.push_back(nrm);
    }
    if (keep.empty()) return beta;

    Eigen::MatrixXd a(x.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        a.col(static_cast<Eigen::Index>(c)) = x.col(keep[c]) / norms[c];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < a.cols()) {
        throw NumericalError("lsm: rank-deficient regression",
                             "time step " + std::to_string(u) + ", rank " + std::to_string(qr.rank()) + " of " +
                                 std::to_string(a.cols()));
    }
    const Eigen::VectorXd sol = qr.solve(y);
    for (std::size_t c = 0; c < keep.size(); ++c) {
        beta[static_cast<std::size_t>(keep[c])] = sol[static_cast<Eigen::Index>(c)] / norms[c];
    }
    return beta;
}

}  // namespace

void LsmConfig::validate() const {
    if (pricing_paths < 100) throw ParameterError("lsm.pricing_paths must be >= 100");
    if (degree > 12) throw ParameterError("lsm.degree must be <= 12");
    if (!(domain_k > 0.0)) throw ParameterError("lsm.domain_k must be > 0");
}

std::size_t lsm_basis_size(const Product& product, std::size_t degree) {
    return degree + 2 + (product.has_knockout() ? 1 : 0);
}

void lsm_basis(const Product& product, const Domain& scaling, std::size_t degree, double t, double x,
               std::span<double> out) {
    const double z = scaling.to_unit(x);
    double zp = 1.0;
    for (std::size_t j = 0; j <= degree; ++j) {
        out[j] = zp;
        zp *= z;
    }
    const double g = product.intrinsic(t, x);
    out[degree + 1] = g;
    if (product.has_knockout()) out[degree + 2] = x <= product.log_barrier() ? g : 0.0;
}

LsmValueFunctions lsm_value_functions(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                      const LsmConfig& config) {
    config.validate();
    if (grid.size() < 2) throw ScheduleError("lsm: grid needs at least two points");
    const auto decision = product.decision_mask(grid);
    const std::size_t n = grid.size() - 1;

    LsmValueFunctions vf;
    vf.grid = grid;
    vf.degree = effective_degree(product, config.degree);
    vf.scaling = select_domain(model, product, grid.back() - grid.front(), config.domain_k, false);
    vf.beta.assign(grid.size(), {});
    const std::size_t p = lsm_basis_size(product, vf.degree);

    const auto t0 = std::chrono::steady_clock::now();
    const PathEnsemble ens = simulate(model, Measure::RiskNeutral, config.pricing_paths, grid, config.seed);
    vf.simulate_seconds = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    const std::size_t m = ens.paths;
    const bool knockout = product.has_knockout();
    const bool exercise = product.has_early_exercise();
    const auto* hw = std::get_if<HullWhiteParams>(&model);

    // alive_before[u * m + i]: not knocked out at any monitoring date before t_u
    std::vector<unsigned char> alive_before;
    if (knockout) {
        alive_before.assign((n + 1) * m, 1);
        for (std::size_t u = 1; u <= n; ++u) {
            for (std::size_t i = 0; i < m; ++i) {
                const bool prev = alive_before[(u - 1) * m + i];
                const bool knocked = decision[u - 1] && ens(i, u - 1) > product.log_barrier();
                alive_before[u * m + i] = prev && !knocked;
            }
        }
    }

    // realized value along each path, rolled back step by step
    std::vector<double> cash(m);
    for (std::size_t i = 0; i < m; ++i) cash[i] = product.terminal_value(ens(i, n));

    std::vector<double> y(m);
    std::vector<double> row(p);
    for (std::size_t u = n; u-- > 0;) {
        const double t = grid[u];
        const double dt = grid[u + 1] - grid[u];
        for (std::size_t i = 0; i < m; ++i) {
            const double r = hw ? hw_alpha(t, *hw) + ens(i, u) : product.rate();
            y[i] = std::exp(-r * dt) * cash[i];
        }
        const bool monitor = knockout && decision[u];
        if (monitor) {
            for (std::size_t i = 0; i < m; ++i) {
                if (ens(i, u) > product.log_barrier()) y[i] = 0.0;
            }
        }

        std::vector<std::size_t> rows;
        rows.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            if (!knockout || alive_before[u * m + i]) rows.push_back(i);
        }
        const auto xs = ens.at(u);
        double lo = 0.0;
        double hi = 0.0;
        if (!rows.empty()) {
            lo = hi = xs[rows.front()];
            for (std::size_t i : rows) {
                lo = std::min(lo, xs[i]);
                hi = std::max(hi, xs[i]);
            }
        }

        std::vector<double> beta(p, 0.0);
        if (!rows.empty() && hi - lo <= 1e-14 * std::max(1.0, std::fabs(lo))) {
            // common start: only the constant is identifiable
            double s = 0.0;
            for (std::size_t i : rows) s += y[i];
            beta[0] = s / static_cast<double>(rows.size());
        } else if (!rows.empty()) {
            Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
            Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const std::size_t i = rows[r];
                lsm_basis(product, vf.scaling, vf.degree, t, xs[i], row);
                for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = row[j];
                target[static_cast<Eigen::Index>(r)] = y[i];
            }
            beta = regress(x, target, u);
        }
        vf.beta[u] = beta;

        if (exercise && decision[u]) {
            for (std::size_t i = 0; i < m; ++i) {
                const double g = product.intrinsic(t, xs[i]);
                if (!(g > 0.0)) continue;
                lsm_basis(product, vf.scaling, vf.degree, t, xs[i], row);
                double c = 0.0;
                for (std::size_t j = 0; j < p; ++j) c += beta[j] * row[j];
                if (g >= c) y[i] = g;
            }
        }
        cash.swap(y);
    }
    vf.regress_seconds = seconds_since(t1);

    // t_0 is shared by every path
    vf.price = vf.beta[0][0];
    if (exercise && decision[0]) vf.price = std::max(vf.price, product.intrinsic(grid[0], 0.0));
    return vf;
}

void LsmValuer::held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const {
    const std::size_t n = vf_.grid.size() - 1;
    const double t = vf_.grid[u];
    if (u == n) {
        const bool exercise_slot = product_.has_early_exercise() && product_.is_decision_date(t);
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = exercise_slot ? 0.0 : product_.terminal_value(xs[i]);
        return;
    }
    const auto& beta = vf_.beta[u];
    std::vector<double> row(beta.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        lsm_basis(product_, vf_.scaling, vf_.degree, t, xs[i], row);
        double v = 0.0;
        for (std::size_t j = 0; j < beta.size(); ++j) v += beta[j] * row[j];
        out[i] = v;
    }
}

ExposureProfile lsm_exposure(const LsmValueFunctions& vf, const Product& product, const PathEnsemble& ensemble,
                             const ModelSpec& model, const ExposureOptions& options) {
    ExposureOptions opts = options;
    opts.method = "lsm";
    return compute_exposure(LsmValuer(vf, product), ensemble, product, model, opts);
}

}  // namespace dce
