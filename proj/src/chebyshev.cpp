#include "dce/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dce/errors.hpp"

namespace dce {

Domain::Domain(double lo, double hi) : lower(lo), upper(hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        std::ostringstream msg;
        msg << "invalid domain [" << lo << ", " << hi << "]";
        throw DomainError(msg.str());
    }
}

std::vector<double> cheb_nodes(std::size_t degree, const Domain& domain) {
    if (degree < 1) throw ParameterError("cheb_nodes: degree must be >= 1");
    std::vector<double> nodes(degree + 1);
    const double n = static_cast<double>(degree);
    for (std::size_t k = 0; k <= degree; ++k) {
        nodes[k] = domain.from_unit(std::cos(std::numbers::pi * static_cast<double>(k) / n));
    }
    // cos(pi/2) is not exactly zero in floating point
    if (degree % 2 == 0) nodes[degree / 2] = domain.from_unit(0.0);
    return nodes;
}

std::vector<double> chebyshev_coefficients(std::span<const double> values) {
    if (values.size() < 2) throw ParameterError("chebyshev_coefficients: need at least two values");
    const std::size_t n = values.size() - 1;
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("chebyshev_coefficients: non-finite nodal value");
    }

    // cos(pi j k / N) only depends on j k mod 2N
    const std::size_t period = 2 * n;
    std::vector<double> table(period);
    for (std::size_t m = 0; m < period; ++m) {
        table[m] = std::cos(std::numbers::pi * static_cast<double>(m) / static_cast<double>(n));
    }

    std::vector<double> halved(values.begin(), values.end());
    halved.front() *= 0.5;
    halved.back() *= 0.5;

    std::vector<double> coeffs(n + 1);
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t j = 0; j <= n; ++j) {
        double sum = 0.0;
        std::size_t idx = 0;
        for (std::size_t k = 0; k <= n; ++k) {
            sum += halved[k] * table[idx];
            idx += j;
            if (idx >= period) idx %= period;
        }
        coeffs[j] = scale * sum;
    }
    coeffs.front() *= 0.5;
    coeffs.back() *= 0.5;
    return coeffs;
}

double clenshaw(std::span<const double> c, double z) noexcept {
    double b1 = 0.0;
    double b2 = 0.0;
    const double two_z = 2.0 * z;
    for (std::size_t k = c.size() - 1; k >= 1; --k) {
        const double b0 = c[k] + two_z * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return c[0] + z * b1 - b2;
}

void chebyshev_basis(double z, std::span<double> out) noexcept {
    if (out.empty()) return;
    out[0] = 1.0;
    if (out.size() == 1) return;
    out[1] = z;
    const double two_z = 2.0 * z;
    for (std::size_t j = 2; j < out.size(); ++j) out[j] = two_z * out[j - 1] - out[j - 2];
}

namespace {

// Blocked Clenshaw: the inner loop runs across points so it vectorises.
constexpr std::size_t kBlock = 64;

void clenshaw_block(std::span<const double> c, const Domain& domain, const double* xs, double* out,
                    std::size_t count) {
    double z[kBlock];
    double b1[kBlock];
    double b2[kBlock];
    const double lo_hi = domain.lower + domain.upper;
    const double inv_w = 1.0 / (domain.upper - domain.lower);
    for (std::size_t i = 0; i < count; ++i) {
        z[i] = (2.0 * xs[i] - lo_hi) * inv_w;
        b1[i] = 0.0;
        b2[i] = 0.0;
    }
    for (std::size_t k = c.size() - 1; k >= 1; --k) {
        const double ck = c[k];
        for (std::size_t i = 0; i < count; ++i) {
            const double b0 = ck + 2.0 * z[i] * b1[i] - b2[i];
            b2[i] = b1[i];
            b1[i] = b0;
        }
    }
    const double c0 = c[0];
    for (std::size_t i = 0; i < count; ++i) out[i] = c0 + z[i] * b1[i] - b2[i];
}

}  // namespace

ChebApprox::ChebApprox(Domain domain, std::vector<double> coeffs)
    : domain_(domain), coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw ParameterError("ChebApprox: empty coefficient vector");
    for (double c : coeffs_) {
        if (!std::isfinite(c)) throw DataError("ChebApprox: non-finite coefficient");
    }
}

ChebApprox ChebApprox::fit(std::span<const double> nodal_values, const Domain& domain) {
    return ChebApprox(domain, chebyshev_coefficients(nodal_values));
}

double ChebApprox::operator()(double x) const noexcept {
    return clenshaw(coeffs_, domain_.to_unit(x));
}

void ChebApprox::evaluate(std::span<const double> xs, std::span<double> out) const {
    if (xs.size() != out.size()) throw ConfigurationError("ChebApprox::evaluate: size mismatch");
    for (std::size_t start = 0; start < xs.size(); start += kBlock) {
        const std::size_t count = std::min(kBlock, xs.size() - start);
        clenshaw_block(coeffs_, domain_, xs.data() + start, out.data() + start, count);
    }
}

ChebApprox ChebApprox::derivative() const {
    const std::size_t n = degree();
    if (n == 0) return ChebApprox(domain_, {0.0});
    // c'_{k-1} = c'_{k+1} + 2k c_k, with c'_N = c'_{N+1} = 0
    std::vector<double> d(n + 2, 0.0);
    for (std::size_t k = n; k >= 1; --k) {
        d[k - 1] = d[k + 1] + 2.0 * static_cast<double>(k) * coeffs_[k];
    }
    d[0] *= 0.5;
    d.resize(n);
    const double scale = 2.0 / domain_.width();
    for (double& v : d) v *= scale;
    return ChebApprox(domain_, std::move(d));
}

std::vector<double> ChebApprox::coefficient_decay() const {
    std::vector<double> out(coeffs_.size());
    std::transform(coeffs_.begin(), coeffs_.end(), out.begin(), [](double c) { return std::abs(c); });
    return out;
}

SplitApprox::SplitApprox(ChebApprox left, ChebApprox right)
    : left_(std::move(left)), right_(std::move(right)), split_(left_.domain().upper) {
    if (left_.domain().upper != right_.domain().lower) {
        throw DomainError("SplitApprox: pieces do not share the split point");
    }
}

void SplitApprox::evaluate(std::span<const double> xs, std::span<double> out) const {
    if (xs.size() != out.size()) throw ConfigurationError("SplitApprox::evaluate: size mismatch");
    double lbuf[kBlock];
    double rbuf[kBlock];
    for (std::size_t start = 0; start < xs.size(); start += kBlock) {
        const std::size_t count = std::min(kBlock, xs.size() - start);
        const double* x = xs.data() + start;
        clenshaw_block(left_.coeffs(), left_.domain(), x, lbuf, count);
        clenshaw_block(right_.coeffs(), right_.domain(), x, rbuf, count);
        for (std::size_t i = 0; i < count; ++i) out[start + i] = x[i] <= split_ ? lbuf[i] : rbuf[i];
    }
}

std::vector<double> evaluate_batch(const ChebApprox& approx, std::span<const double> xs) {
    std::vector<double> out(xs.size());
    approx.evaluate(xs, out);
    return out;
}

std::vector<double> evaluate_batch(const SplitApprox& approx, std::span<const double> xs) {
    std::vector<double> out(xs.size());
    approx.evaluate(xs, out);
    return out;
}

}  // namespace dce
