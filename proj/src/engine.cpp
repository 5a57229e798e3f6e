#include "dce/engine.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "dce/errors.hpp"
#include "dce/parallel.hpp"
#include "dce/reference.hpp"

namespace dce {

namespace {

constexpr std::size_t kBlock = 64;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// out[p][i] = sum_j coeffs[p][j] T_j(z[i]) for m <= kBlock points. Each
// product sees exactly the same basis values and summation order whether it
// is evaluated alone or alongside others.
void basis_dot_block(const double* z, std::size_t m, std::span<const std::span<const double>> coeffs,
                     std::span<double* const> out) {
    double t_prev[kBlock];
    double t_cur[kBlock];
    const std::size_t terms = coeffs.front().size();
    for (std::size_t p = 0; p < coeffs.size(); ++p) {
        const double c0 = coeffs[p][0];
        for (std::size_t i = 0; i < m; ++i) out[p][i] = c0;
    }
    if (terms == 1) return;
    for (std::size_t i = 0; i < m; ++i) {
        t_prev[i] = 1.0;
        t_cur[i] = z[i];
    }
    for (std::size_t j = 1;; ++j) {
        for (std::size_t p = 0; p < coeffs.size(); ++p) {
            const double cj = coeffs[p][j];
            double* o = out[p];
            for (std::size_t i = 0; i < m; ++i) o[i] += cj * t_cur[i];
        }
        if (j + 1 == terms) break;
        for (std::size_t i = 0; i < m; ++i) {
            const double next = 2.0 * z[i] * t_cur[i] - t_prev[i];
            t_prev[i] = t_cur[i];
            t_cur[i] = next;
        }
    }
}

bool is_uniform(const std::vector<double>& grid) {
    const double dt = grid[1] - grid[0];
    for (std::size_t u = 1; u + 1 < grid.size(); ++u) {
        if (std::fabs((grid[u + 1] - grid[u]) - dt) > 1e-9 * std::max(1.0, dt)) return false;
    }
    return true;
}

Interpolant zero_function(const NodeLayout& layout) {
    std::vector<double> zeros(layout.size(), 0.0);
    return layout.fit(zeros);
}

// Out-of-domain policy shared by every Chebyshev-backed valuer. Returns
// true when x was handled without the interpolant; otherwise x is replaced
// by the point at which to evaluate.
bool outside_value(const Product& product, const Domain& dom, double t, bool held, double& x, double& value) {
    if (dom.contains(x)) return false;
    if (product.clamps_outside()) {
        x = std::clamp(x, dom.lower, dom.upper);
        return false;
    }
    value = product.extrapolate(t, x, dom, held);
    return true;
}

// The payoff at maturity is known exactly, so it is not interpolated.
void terminal_held(const Product& product, bool exercise_slot, std::span<const double> xs, std::span<double> out) {
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = exercise_slot ? 0.0 : product.terminal_value(xs[i]);
}

}  // namespace

void Interpolant::evaluate(std::span<const double> xs, std::span<double> out) const {
    if (split_) {
        split_->evaluate(xs, out);
    } else {
        single_->evaluate(xs, out);
    }
}

Interpolant Interpolant::derivative() const {
    if (split_) return Interpolant(split_->derivative());
    return Interpolant(single_->derivative());
}

Domain Interpolant::domain() const { return split_ ? split_->domain() : single_->domain(); }

void EngineConfig::validate() const {
    if (degree < 4) throw ParameterError("engine.N must be >= 4");
    if (!(domain_k > 0.0) || !std::isfinite(domain_k)) throw ParameterError("engine.k must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("engine.alpha must lie in (0, 1)");
    if (split) {
        const std::size_t l = split_left ? split_left : degree / 2;
        const std::size_t r = split_right ? split_right : degree / 2;
        if (l < 4 || r < 4) throw ParameterError("engine.split degrees must be >= 4");
    }
}

Domain select_domain(const ModelSpec& model, const Product& product, double horizon, double k,
                     bool include_real_world) {
    if (!(horizon > 0.0)) throw ParameterError("select_domain: horizon must be > 0");
    if (!(k > 0.0)) throw ParameterError("select_domain: k must be > 0");
    double lower = state_mean(model, Measure::RiskNeutral, horizon) - k * state_std(model, Measure::RiskNeutral, horizon);
    double upper = state_mean(model, Measure::RiskNeutral, horizon) + k * state_std(model, Measure::RiskNeutral, horizon);
    if (include_real_world) {
        const double m = state_mean(model, Measure::RealWorld, horizon);
        const double s = state_std(model, Measure::RealWorld, horizon);
        lower = std::min(lower, m - k * s);
        upper = std::max(upper, m + k * s);
    }
    if (product.has_knockout()) upper = product.log_barrier();
    return {lower, upper};
}

Interpolant NodeLayout::fit(std::span<const double> nodal) const {
    if (nodal.size() != nodes.size()) throw SizeError("layout: nodal value count does not match the nodes");
    if (!split) return Interpolant(ChebApprox::fit(nodal, domain));
    const Domain left{domain.lower, split_point};
    const Domain right{split_point, domain.upper};
    return Interpolant(SplitApprox(ChebApprox::fit(nodal.subspan(0, left_degree + 1), left),
                                   ChebApprox::fit(nodal.subspan(left_degree + 1), right)));
}

std::vector<double> NodeLayout::stacked_coeffs(const Interpolant& f) const {
    std::vector<double> out;
    out.reserve(nodes.size());
    if (const auto* s = f.split()) {
        out.assign(s->left().coeffs().begin(), s->left().coeffs().end());
        out.insert(out.end(), s->right().coeffs().begin(), s->right().coeffs().end());
    } else {
        out.assign(f.single()->coeffs().begin(), f.single()->coeffs().end());
    }
    if (out.size() != nodes.size()) throw SizeError("layout: interpolant does not match the layout");
    return out;
}

NodeLayout make_layout(const Domain& domain, const EngineConfig& config, const Product& product) {
    config.validate();
    NodeLayout layout;
    layout.domain = domain;
    if (!config.split) {
        layout.left_degree = config.degree;
        layout.nodes = cheb_nodes(config.degree, domain);
        return layout;
    }
    double sp;
    if (config.split_point) {
        sp = *config.split_point;
    } else if (product.is_equity()) {
        sp = std::log(product.strike() / product.s0());
    } else {
        sp = domain.midpoint();
    }
    if (!(sp > domain.lower && sp < domain.upper)) {
        throw ConfigurationError("engine.split point " + std::to_string(sp) + " lies outside the domain");
    }
    layout.split = true;
    layout.split_point = sp;
    layout.left_degree = config.split_left ? config.split_left : config.degree / 2;
    layout.right_degree = config.split_right ? config.split_right : config.degree / 2;
    layout.nodes = cheb_nodes(layout.left_degree, Domain{domain.lower, sp});
    const auto right = cheb_nodes(layout.right_degree, Domain{sp, domain.upper});
    layout.nodes.insert(layout.nodes.end(), right.begin(), right.end());
    return layout;
}

RowMatrix step_moment_matrix(const ModelSpec& model, const NodeLayout& layout, double dt,
                             const CfQuadratureConfig& cf) {
    if (!(dt > 0.0)) throw ParameterError("step_moment_matrix: dt must be > 0");
    auto block = [&](const Domain& target, std::size_t degree) -> RowMatrix {
        if (const auto* bs = std::get_if<BlackScholesParams>(&model)) {
            return normal_moment_block(layout.nodes, target, 1.0, (bs->r - 0.5 * bs->sigma * bs->sigma) * dt,
                                       bs->sigma * bs->sigma * dt, degree);
        }
        if (const auto* hw = std::get_if<HullWhiteParams>(&model)) {
            const double a = hw->a_q;
            const double var = hw->sigma_q * hw->sigma_q * -std::expm1(-2.0 * a * dt) / (2.0 * a);
            return normal_moment_block(layout.nodes, target, std::exp(-a * dt), 0.0, var, degree);
        }
        const auto& mj = std::get<MertonParams>(model);
        const auto cu = merton_cumulants(dt, mj, Measure::RiskNeutral);
        CfSpec spec{[mj, dt](double z) { return merton_cf(std::complex<double>(z, 0.0), dt, mj); }, cu.c1, cu.c2, cu.c4};
        return cf_moment_block(spec, layout.nodes, target, degree, cf);
    };
    if (!layout.split) return block(layout.domain, layout.left_degree);
    const RowMatrix left = block(Domain{layout.domain.lower, layout.split_point}, layout.left_degree);
    const RowMatrix right = block(Domain{layout.split_point, layout.domain.upper}, layout.right_degree);
    RowMatrix out(left.rows(), left.cols() + right.cols());
    out << left, right;
    return out;
}

const Interpolant& ValueFunctionSet::held(std::size_t u) const {
    if (continuation[u]) return *continuation[u];
    return value[u];
}

double one_step_value(const ModelSpec& model, const Product& product, double x, double dt) {
    if (!product.is_equity()) throw ConfigurationError("one_step_value: smoothing is defined for equity products only");
    const auto& spec = product.spec();
    OptionKind kind = OptionKind::Put;
    std::visit([&](const auto& s) {
        if constexpr (!std::is_same_v<std::decay_t<decltype(s)>, SwaptionSpec>) kind = s.kind;
    }, spec);
    const double s = product.s0() * std::exp(x);
    const double k = product.strike();
    const double r = product.rate();
    const bool knockout = product.has_knockout();
    if (const auto* bs = std::get_if<BlackScholesParams>(&model)) {
        if (knockout) {
            const double b = product.s0() * std::exp(product.log_barrier());
            if (kind == OptionKind::Call) return bs_capped_call(s, k, b, r, bs->sigma, dt);
            // up-and-out put: the payoff vanishes above K < B already
            return bs_european(s, k, r, bs->sigma, dt, kind);
        }
        return bs_european(s, k, r, bs->sigma, dt, kind);
    }
    const double ko = knockout ? product.log_barrier() - x : std::numeric_limits<double>::infinity();
    return cos_european(equity_law(model, dt), s, k, r, dt, kind, {}, ko);
}

ValueFunctionSet backward_induction(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                    const EngineConfig& config, const RowMatrix* gamma, InductionTiming* timing) {
    config.validate();
    if (grid.size() < 2) throw ScheduleError("backward_induction: grid needs at least two points");
    if (!is_uniform(grid)) throw ConfigurationError("backward_induction: the step operator needs a uniform grid");
    const Domain domain = select_domain(model, product, grid.back() - grid.front(), config.domain_k,
                                        config.real_world_domain);
    const NodeLayout layout = make_layout(domain, config, product);

    const auto t0 = std::chrono::steady_clock::now();
    RowMatrix own;
    if (gamma) {
        if (gamma->rows() != static_cast<Eigen::Index>(layout.size()) ||
            gamma->cols() != static_cast<Eigen::Index>(layout.size())) {
            throw ConfigurationError("backward_induction: supplied moment matrix does not match the layout");
        }
    } else {
        own = step_moment_matrix(model, layout, grid[1] - grid[0], config.cf);
        gamma = &own;
    }
    const double pre = seconds_since(t0);
    const auto t1 = std::chrono::steady_clock::now();
    auto vfs = backward_induction(model, product, grid, layout, *gamma, config.smoothing);
    if (timing) {
        timing->precompute_seconds = pre;
        timing->induct_seconds = seconds_since(t1);
    }
    return vfs;
}

ValueFunctionSet backward_induction(const ModelSpec& model, const Product& product, const std::vector<double>& grid,
                                    const NodeLayout& layout, const RowMatrix& gamma, bool smoothing) {
    if (grid.size() < 2) throw ScheduleError("backward_induction: grid needs at least two points");
    if (!is_uniform(grid)) throw ConfigurationError("backward_induction: the step operator needs a uniform grid");
    const std::size_t m = layout.size();
    if (gamma.rows() != static_cast<Eigen::Index>(m) || gamma.cols() != static_cast<Eigen::Index>(m)) {
        throw ConfigurationError("backward_induction: moment matrix does not match the layout");
    }
    const std::size_t n = grid.size() - 1;
    const double dt = grid[1] - grid[0];
    const bool smooth = smoothing && product.is_equity();
    const auto* hw = std::get_if<HullWhiteParams>(&model);

    ValueFunctionSet vfs;
    vfs.grid = grid;
    vfs.decision = product.decision_mask(grid);
    vfs.domain = layout.domain;
    vfs.early_exercise = product.has_early_exercise();
    vfs.continuation.resize(n + 1);

    std::vector<Interpolant> values;
    values.reserve(n + 1);
    std::vector<double> nodal(m);
    for (std::size_t k = 0; k < m; ++k) nodal[k] = product.terminal_value(layout.nodes[k]);
    values.push_back(layout.fit(nodal));
    if (vfs.early_exercise && vfs.decision[n]) vfs.continuation[n] = zero_function(layout);

    auto check_finite = [](const std::vector<double>& v, std::size_t u) {
        for (double y : v) {
            if (!std::isfinite(y)) {
                throw NumericalError("backward_induction: non-finite value", "time step " + std::to_string(u));
            }
        }
    };

    Eigen::VectorXd coeffs(static_cast<Eigen::Index>(m));
    std::vector<double> cont(m);
    for (std::size_t u = n; u-- > 0;) {
        const double t = grid[u];
        if (smooth && u + 1 == n) {
            parallel_for(m, [&](std::size_t begin, std::size_t end) {
                for (std::size_t k = begin; k < end; ++k) cont[k] = one_step_value(model, product, layout.nodes[k], dt);
            });
        } else {
            const auto stacked = layout.stacked_coeffs(values.back());
            std::copy(stacked.begin(), stacked.end(), coeffs.data());
            const Eigen::VectorXd ex = gamma * coeffs;
            for (std::size_t k = 0; k < m; ++k) {
                const double disc = hw ? std::exp(-dt * (hw_alpha(t, *hw) + layout.nodes[k]))
                                       : std::exp(-product.rate() * dt);
                cont[k] = disc * ex[static_cast<Eigen::Index>(k)];
            }
        }
        check_finite(cont, u);

        const bool exercise_date = vfs.decision[u] && vfs.early_exercise;
        if (vfs.decision[u]) {
            for (std::size_t k = 0; k < m; ++k) {
                const double x = layout.nodes[k];
                nodal[k] = product.dp_combine(t, product.intrinsic(t, x), cont[k], x);
            }
        } else {
            nodal = cont;
        }
        check_finite(nodal, u);
        if (exercise_date) vfs.continuation[u] = layout.fit(cont);
        values.push_back(layout.fit(nodal));
    }
    std::reverse(values.begin(), values.end());
    vfs.value = std::move(values);
    return vfs;
}

void ChebValuer::held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const {
    const Interpolant& f = vfs_.held(u);
    const double t = vfs_.grid[u];
    const bool held = vfs_.continuation[u].has_value();
    const Domain& dom = vfs_.domain;
    if (u + 1 == vfs_.grid.size()) {
        terminal_held(product_, held, xs, out);
        return;
    }

    if (const auto* s = f.single()) {
        const std::array<std::span<const double>, 1> coeffs{s->coeffs()};
        double z[kBlock];
        double vals[kBlock];
        double* outs[1] = {vals};
        for (std::size_t b = 0; b < xs.size(); b += kBlock) {
            const std::size_t cnt = std::min(kBlock, xs.size() - b);
            for (std::size_t i = 0; i < cnt; ++i) z[i] = dom.to_unit(std::clamp(xs[b + i], dom.lower, dom.upper));
            basis_dot_block(z, cnt, coeffs, outs);
            for (std::size_t i = 0; i < cnt; ++i) {
                double x = xs[b + i];
                double v = 0.0;
                out[b + i] = outside_value(product_, dom, t, held, x, v) ? v : vals[i];
            }
        }
        return;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double x = xs[i];
        double v = 0.0;
        out[i] = outside_value(product_, dom, t, held, x, v) ? v : f(x);
    }
}

GreekProfiles greek_profiles(const ValueFunctionSet& vfs, const PathEnsemble& ensemble) {
    if (ensemble.grid.size() != vfs.grid.size()) throw ConfigurationError("greeks: ensemble grid does not match");
    GreekProfiles g;
    g.paths = ensemble.paths;
    g.delta.assign(vfs.grid.size() * ensemble.paths, 0.0);
    g.gamma.assign(vfs.grid.size() * ensemble.paths, 0.0);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t u = 0; u < vfs.grid.size(); ++u) {
        const Interpolant d1 = vfs.value[u].derivative();
        const Interpolant d2 = d1.derivative();
        const auto xs = ensemble.at(u);
        std::span<double> dd(g.delta.data() + u * ensemble.paths, ensemble.paths);
        std::span<double> gg(g.gamma.data() + u * ensemble.paths, ensemble.paths);
        d1.evaluate(xs, dd);
        d2.evaluate(xs, gg);
        // the polynomial continuation carries no information outside the domain
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!vfs.domain.contains(xs[i])) dd[i] = gg[i] = nan;
        }
    }
    return g;
}

double x_to_spot_delta(double dv_dx, double spot) { return dv_dx / spot; }

double x_to_spot_gamma(double dv_dx, double d2v_dx2, double spot) { return (d2v_dx2 - dv_dx) / (spot * spot); }

std::vector<ExposureProfile> multi_product_exposure(const std::vector<const ValueFunctionSet*>& vfs,
                                                    const std::vector<const Product*>& products,
                                                    const PathEnsemble& ensemble, const ModelSpec& model,
                                                    const ExposureOptions& options, MultiProductStats* stats) {
    if (vfs.empty() || vfs.size() != products.size()) {
        throw ConfigurationError("multi_product_exposure: need one value-function set per product");
    }
    const ValueFunctionSet& first = *vfs.front();
    for (const auto* v : vfs) {
        if (!(v->domain == first.domain)) throw ConfigurationError("multi_product_exposure: domains differ");
        if (v->grid != first.grid) throw ConfigurationError("multi_product_exposure: time grids differ");
        for (const auto& f : v->value) {
            if (f.is_split()) throw ConfigurationError("multi_product_exposure: split layouts are not shared");
            if (f.single()->degree() != first.value.front().single()->degree()) {
                throw ConfigurationError("multi_product_exposure: degrees differ");
            }
        }
    }
    const auto& grid = first.grid;
    if (grid.size() != ensemble.grid.size()) throw ConfigurationError("exposure: ensemble grid does not match value functions");
    for (std::size_t u = 0; u < grid.size(); ++u) {
        if (std::fabs(grid[u] - ensemble.grid[u]) > 1e-12) {
            throw ConfigurationError("exposure: ensemble grid does not match value functions");
        }
    }

    const std::size_t np = vfs.size();
    const std::size_t mp = ensemble.paths;
    const Domain& dom = first.domain;
    std::vector<double> discount;
    if (ensemble.measure == Measure::RiskNeutral) discount = pathwise_discount(ensemble, model);

    std::vector<ExposureAccumulator> acc;
    acc.reserve(np);
    for (const auto* p : products) acc.emplace_back(*p, grid, mp, ensemble.measure, options);
    std::vector<std::vector<double>> held(np, std::vector<double>(mp));

    std::uint64_t basis_count = 0;
    for (std::size_t u = 0; u < grid.size(); ++u) {
        const double t = grid[u];
        const auto xs = ensemble.at(u);
        std::span<const double> d;
        if (!discount.empty()) d = std::span<const double>(discount).subspan(u * mp, mp);
        if (u + 1 == grid.size()) {
            for (std::size_t p = 0; p < np; ++p) {
                terminal_held(*products[p], vfs[p]->continuation[u].has_value(), xs, held[p]);
                acc[p].step(u, xs, held[p], d);
            }
            continue;
        }
        std::vector<std::span<const double>> coeffs(np);
        std::vector<char> held_slot(np);
        for (std::size_t p = 0; p < np; ++p) {
            coeffs[p] = vfs[p]->held(u).single()->coeffs();
            held_slot[p] = vfs[p]->continuation[u].has_value();
        }
        parallel_for(mp, [&](std::size_t begin, std::size_t end) {
            double z[kBlock];
            std::vector<double> vals(np * kBlock);
            std::vector<double*> outs(np);
            for (std::size_t p = 0; p < np; ++p) outs[p] = vals.data() + p * kBlock;
            for (std::size_t b = begin; b < end; b += kBlock) {
                const std::size_t cnt = std::min(kBlock, end - b);
                // the shared basis is built at the clamped point
                for (std::size_t i = 0; i < cnt; ++i) z[i] = dom.to_unit(std::clamp(xs[b + i], dom.lower, dom.upper));
                basis_dot_block(z, cnt, coeffs, outs);
                for (std::size_t p = 0; p < np; ++p) {
                    for (std::size_t i = 0; i < cnt; ++i) {
                        double x = xs[b + i];
                        double v = 0.0;
                        const bool handled = outside_value(*products[p], dom, t, held_slot[p], x, v);
                        held[p][b + i] = handled ? v : outs[p][i];
                    }
                }
            }
        }, 1024);
        basis_count += mp;
        for (std::size_t p = 0; p < np; ++p) acc[p].step(u, xs, held[p], d);
    }
    if (stats) stats->basis_evaluations = basis_count;

    std::vector<ExposureProfile> out;
    out.reserve(np);
    for (auto& a : acc) out.push_back(a.finish());
    return out;
}

}  // namespace dce
