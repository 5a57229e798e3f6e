#include "dce/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dce/errors.hpp"
#include "dce/parallel.hpp"

namespace dce {

namespace {

void check_degree(std::size_t degree) {
    if (degree < 1) throw ParameterError("moment matrix: degree must be >= 1");
    if (degree > 2048) throw SizeError("moment matrix: degree above 2048");
}

// Clenshaw-Curtis rule on [-1, 1] with n + 1 points cos(pi l / n), n even.
void clenshaw_curtis(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n + 1);
    weights.resize(n + 1);
    const double dn = static_cast<double>(n);
    for (std::size_t l = 0; l <= n; ++l) {
        const double theta = std::numbers::pi * static_cast<double>(l) / dn;
        nodes[l] = std::cos(theta);
        double sum = 0.0;
        for (std::size_t j = 1; j <= n / 2; ++j) {
            const double bj = (2 * j == n) ? 1.0 : 2.0;
            const double dj = static_cast<double>(j);
            sum += bj / (4.0 * dj * dj - 1.0) * std::cos(2.0 * dj * theta);
        }
        const double cl = (l == 0 || l == n) ? 1.0 : 2.0;
        weights[l] = cl / dn * (1.0 - sum);
    }
}

struct CosDensity {
    double a = 0.0;
    double omega = 0.0;           // pi / (b - a)
    std::vector<double> coeffs;  // q(u) = sum_m coeffs[m] cos(m omega (u - a))
    double xi_max = 0.0;
};

CosDensity recover_density(const CfSpec& spec, double need_lo, double need_hi, const CfQuadratureConfig& cfg) {
    const double spread = cfg.truncation_l * std::sqrt(spec.c2 + std::sqrt(std::max(spec.c4, 0.0)));
    const double a = std::min(spec.c1 - spread, need_lo);
    const double b = std::max(spec.c1 + spread, need_hi);
    CosDensity d;
    d.a = a;
    d.omega = std::numbers::pi / (b - a);

    constexpr double kNegligible = 1e-17;
    constexpr double kTailLimit = 1e-10;
    std::size_t terms = std::max<std::size_t>(cfg.cos_terms, 16);
    const std::size_t max_terms = terms * 16;
    for (;;) {
        const double tail = std::abs(spec.cf(d.omega * static_cast<double>(terms - 1)));
        if (tail <= kTailLimit) break;
        if (terms >= max_terms) {
            std::ostringstream diag;
            diag << "|cf(" << d.omega * static_cast<double>(terms - 1) << ")| = " << tail << " after " << terms
                 << " cosine terms on [" << a << ", " << b << "]";
            throw NumericalError("cf_moment_matrix: characteristic function does not decay", diag.str());
        }
        terms *= 2;
    }

    d.coeffs.assign(terms, 0.0);
    const double scale = 2.0 / (b - a);
    std::size_t last = 0;
    for (std::size_t m = 0; m < terms; ++m) {
        const double xi = d.omega * static_cast<double>(m);
        const std::complex<double> phi = spec.cf(xi);
        if (std::abs(phi) > kNegligible) last = m;
        const std::complex<double> shift = std::polar(1.0, -xi * a);
        d.coeffs[m] = scale * (phi * shift).real();
    }
    d.coeffs[0] *= 0.5;
    d.coeffs.resize(last + 1);
    d.xi_max = d.omega * static_cast<double>(last);
    return d;
}

RowMatrix cf_block_with_panels(const CosDensity& dens, std::span<const double> starts, const Domain& target,
                               std::size_t degree, std::size_t panels, std::size_t panel_points) {
    std::vector<double> cc_nodes;
    std::vector<double> cc_weights;
    clenshaw_curtis(panel_points - 1, cc_nodes, cc_weights);

    // Panel edges uniform in theta: z_i = cos(pi i / P).
    const std::size_t n_pts = panels * panel_points;
    std::vector<double> z(n_pts);
    std::vector<double> w(n_pts);
    const double half_width = 0.5 * target.width();
    for (std::size_t p = 0; p < panels; ++p) {
        const double z_hi = std::cos(std::numbers::pi * static_cast<double>(p) / static_cast<double>(panels));
        const double z_lo = std::cos(std::numbers::pi * static_cast<double>(p + 1) / static_cast<double>(panels));
        const double mid = 0.5 * (z_hi + z_lo);
        const double half = 0.5 * (z_hi - z_lo);
        for (std::size_t l = 0; l < panel_points; ++l) {
            z[p * panel_points + l] = mid + half * cc_nodes[l];
            w[p * panel_points + l] = half * cc_weights[l] * half_width;
        }
    }

    RowMatrix tmat(n_pts, degree + 1);
    for (std::size_t p = 0; p < n_pts; ++p) {
        chebyshev_basis(z[p], std::span<double>(tmat.row(static_cast<Eigen::Index>(p)).data(), degree + 1));
    }
    std::vector<double> y(n_pts);
    for (std::size_t p = 0; p < n_pts; ++p) y[p] = target.from_unit(z[p]);

    RowMatrix weights(starts.size(), n_pts);
    const std::span<const double> c(dens.coeffs);
    parallel_for(starts.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> zz(n_pts), b1(n_pts), b2(n_pts);
        for (std::size_t k = begin; k < end; ++k) {
            // density as a Chebyshev series in cos(omega (u - a))
            for (std::size_t p = 0; p < n_pts; ++p) {
                zz[p] = std::cos(dens.omega * (y[p] - starts[k] - dens.a));
                b1[p] = 0.0;
                b2[p] = 0.0;
            }
            for (std::size_t m = c.size() - 1; m >= 1; --m) {
                const double cm = c[m];
                for (std::size_t p = 0; p < n_pts; ++p) {
                    const double b0 = cm + 2.0 * zz[p] * b1[p] - b2[p];
                    b2[p] = b1[p];
                    b1[p] = b0;
                }
            }
            double* row = weights.row(static_cast<Eigen::Index>(k)).data();
            for (std::size_t p = 0; p < n_pts; ++p) row[p] = w[p] * (c[0] + zz[p] * b1[p] - b2[p]);
        }
    });
    return weights * tmat;
}

// J_0..J_nmax at kappa > 0 by Miller's backward recurrence, normalised with
// J_0 + 2 sum_k J_2k = 1.
void bessel_j_sequence(double kappa, std::size_t nmax, std::vector<double>& out) {
    const auto extra = static_cast<std::size_t>(std::sqrt(160.0 * static_cast<double>(nmax + 1)));
    const std::size_t start = 2 * ((nmax + extra + 20) / 2);
    out.assign(nmax + 1, 0.0);
    double next = 0.0;
    double cur = 1e-300;
    double norm = 0.0;
    for (std::size_t n = start; n > 0; --n) {
        const double prev = 2.0 * static_cast<double>(n) / kappa * cur - next;  // J_{n-1}
        next = cur;
        cur = prev;
        if (std::fabs(cur) > 1e250) {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for (std::size_t i = n - 1; i <= nmax; ++i) out[i] *= 1e-250;
        }
        if (n - 1 <= nmax) out[n - 1] = cur;
        if (n - 1 > 0 && (n - 1) % 2 == 0) norm += 2.0 * cur;
    }
    norm += cur;
    for (auto& v : out) v /= norm;
}

// Gamma from the cosine-series density without quadrature. With
// q(u) = sum_m c_m cos(m w (u - a)) and y = mid + half z on the target,
//   Gamma_kj = half sum_m c_m Re[e^{i m w (mid - x_k - a)} I_j(m w half)],
//   I_j(kappa) = int_{-1}^{1} T_j(z) e^{i kappa z} dz
//              = sum_n eps_n i^n J_n(kappa) int T_j T_n   (Jacobi-Anger).
// I_j is real for even j and imaginary for odd j.
RowMatrix cf_block_series(const CosDensity& dens, std::span<const double> starts, const Domain& target,
                          std::size_t degree) {
    const std::size_t terms = dens.coeffs.size();
    const double half = 0.5 * target.width();
    const double mid = 0.5 * (target.lower + target.upper);
    const double kappa_max = dens.omega * half * static_cast<double>(terms - 1);
    const auto nmax = static_cast<std::size_t>(std::ceil(kappa_max + 12.0 * std::cbrt(kappa_max) + 40.0));

    // int_{-1}^{1} T_j T_n dz for j + n even
    auto tt = [](std::size_t j, std::size_t n) {
        const double s = static_cast<double>(j + n);
        const double d = static_cast<double>(j) - static_cast<double>(n);
        return 1.0 / (1.0 - s * s) + 1.0 / (1.0 - d * d);
    };

    RowMatrix basis(2 * terms, degree + 1);  // rows m: even-j part, rows terms + m: odd-j part
    basis.setZero();
    parallel_for(terms, [&](std::size_t begin, std::size_t end) {
        std::vector<double> bj;
        std::vector<double> signed_j(nmax + 1);
        for (std::size_t m = begin; m < end; ++m) {
            const double kappa = dens.omega * half * static_cast<double>(m);
            if (m == 0) {
                bj.assign(nmax + 1, 0.0);
                bj[0] = 1.0;
            } else {
                bessel_j_sequence(kappa, nmax, bj);
            }
            // eps_n i^n J_n with the power of i folded into a sign
            for (std::size_t n = 0; n <= nmax; ++n) {
                const double sign = ((n / 2) % 2 == 0) ? 1.0 : -1.0;
                signed_j[n] = (n == 0 ? 1.0 : 2.0) * sign * bj[n];
            }
            for (std::size_t j = 0; j <= degree; ++j) {
                double acc = 0.0;
                for (std::size_t n = j % 2; n <= nmax; n += 2) acc += signed_j[n] * tt(j, n);
                if (j % 2 == 0) {
                    basis(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = acc;
                } else {
                    basis(static_cast<Eigen::Index>(terms + m), static_cast<Eigen::Index>(j)) = -acc;
                }
            }
        }
    });

    RowMatrix phase(starts.size(), 2 * terms);
    for (std::size_t k = 0; k < starts.size(); ++k) {
        const double shift = dens.omega * (mid - starts[k] - dens.a);
        for (std::size_t m = 0; m < terms; ++m) {
            const double th = shift * static_cast<double>(m);
            phase(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = half * dens.coeffs[m] * std::cos(th);
            phase(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(terms + m)) =
                half * dens.coeffs[m] * std::sin(th);
        }
    }
    return phase * basis;
}

}  // namespace

RowMatrix normal_moment_block(std::span<const double> starts, const Domain& target, double scale, double shift,
                              double variance, std::size_t degree) {
    check_degree(degree);
    if (!(variance > 0.0) || !std::isfinite(variance)) throw ParameterError("normal moment matrix: variance must be > 0");
    RowMatrix gamma(starts.size(), degree + 1);
    const double std_y = 2.0 * std::sqrt(variance) / target.width();
    parallel_for(starts.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double mean_y = target.to_unit(scale * starts[k] + shift);
            const auto seq = truncated_normal_cheb_moments(mean_y, std_y, degree);
            std::copy(seq.mu.begin(), seq.mu.end(), gamma.row(static_cast<Eigen::Index>(k)).data());
        }
    });
    return gamma;
}

RowMatrix cf_moment_block(const CfSpec& spec, std::span<const double> starts, const Domain& target, std::size_t degree,
                          const CfQuadratureConfig& config) {
    check_degree(degree);
    if (!spec.cf) throw ParameterError("cf_moment_matrix: missing characteristic function");
    if (!(spec.c2 > 0.0)) throw ParameterError("cf_moment_matrix: second cumulant must be > 0");
    if (config.panel_points < 3 || config.panel_points % 2 == 0) {
        throw ParameterError("cf_moment_matrix: panel_points must be odd and >= 3");
    }
    if (starts.empty()) return RowMatrix(0, degree + 1);

    const auto [lo_it, hi_it] = std::minmax_element(starts.begin(), starts.end());
    const CosDensity dens = recover_density(spec, target.lower - *hi_it, target.upper - *lo_it, config);

    // Enough panels for T_N (phase pi N / P per panel) and for the density's finest scale.
    const double w = target.width();
    const std::size_t for_basis = (degree + 2) / 2;
    const std::size_t for_density = static_cast<std::size_t>(std::ceil(w * dens.xi_max / 4.0));
    const std::size_t panels = std::max({for_basis, for_density, std::size_t{4}});

    RowMatrix gamma = cf_block_series(dens, starts, target, degree);
    if (config.self_check) {
        // independent panel quadrature on the first, middle and last rows
        const std::vector<std::size_t> rows{0, starts.size() / 2, starts.size() - 1};
        std::vector<double> sample;
        for (std::size_t r : rows) sample.push_back(starts[r]);
        const RowMatrix quad = cf_block_with_panels(dens, sample, target, degree, 2 * panels, config.panel_points);
        double dev = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            dev = std::max(dev, (quad.row(static_cast<Eigen::Index>(i)) - gamma.row(static_cast<Eigen::Index>(rows[i])))
                                    .cwiseAbs()
                                    .maxCoeff());
        }
        if (!(dev <= config.self_check_tol)) {
            std::ostringstream diag;
            diag << "series vs panel quadrature (" << 2 * panels << " panels): max deviation " << dev << " > "
                 << config.self_check_tol;
            throw NumericalError("cf_moment_matrix: quadrature self-check failed", diag.str());
        }
    }
    return gamma;
}

MomentMatrix normal_moment_matrix(const Domain& domain, double drift, double variance, std::size_t degree) {
    check_degree(degree);
    const auto nodes = cheb_nodes(degree, domain);
    MomentMatrix out;
    out.gamma = normal_moment_block(nodes, domain, 1.0, drift, variance, degree);
    out.domain = domain;
    out.model_tag = "normal";
    return out;
}

MomentMatrix ou_moment_matrix(const Domain& domain, double decay, double variance, std::size_t degree) {
    check_degree(degree);
    const auto nodes = cheb_nodes(degree, domain);
    MomentMatrix out;
    out.gamma = normal_moment_block(nodes, domain, decay, 0.0, variance, degree);
    out.domain = domain;
    out.model_tag = "ou";
    return out;
}

MomentMatrix cf_moment_matrix(const CfSpec& spec, const Domain& domain, double dt, std::size_t degree,
                              const CfQuadratureConfig& config) {
    check_degree(degree);
    const auto nodes = cheb_nodes(degree, domain);
    MomentMatrix out;
    out.gamma = cf_moment_block(spec, nodes, domain, degree, config);
    out.domain = domain;
    out.dt = dt;
    out.model_tag = "cf";
    return out;
}

MomentMatrix mc_moment_matrix(const IncrementSampler& sampler, const Domain& domain, std::size_t degree,
                              std::size_t n_samples, std::uint64_t seed) {
    check_degree(degree);
    if (n_samples < 1000) throw ParameterError("mc_moment_matrix: n_samples must be >= 1000");
    if (!sampler) throw ParameterError("mc_moment_matrix: missing sampler");

    std::mt19937_64 rng(seed);
    std::vector<double> draws(n_samples);
    for (auto& u : draws) u = sampler(rng);

    const auto nodes = cheb_nodes(degree, domain);
    MomentMatrix out;
    out.gamma = RowMatrix::Zero(degree + 1, degree + 1);
    out.domain = domain;
    out.model_tag = "mc";
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    parallel_for(nodes.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> basis(degree + 1);
        std::vector<double> acc(degree + 1);
        for (std::size_t k = begin; k < end; ++k) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (double u : draws) {
                const double x = nodes[k] + u;
                if (!domain.contains(x)) continue;
                chebyshev_basis(domain.to_unit(x), basis);
                for (std::size_t j = 0; j <= degree; ++j) acc[j] += basis[j];
            }
            for (std::size_t j = 0; j <= degree; ++j) out.gamma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = acc[j] * inv_n;
        }
    });
    return out;
}

}  // namespace dce
