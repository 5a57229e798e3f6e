#pragma once

// Cosine-expansion building blocks shared by the European and backward COS pricers.

#include <cmath>

namespace dce::cos_detail {

// int_c^d e^y cos(k w (y - a)) dy
inline double chi(double k_omega, double a, double c, double d) {
    if (!(c < d)) return 0.0;
    const double ud = k_omega * (d - a);
    const double uc = k_omega * (c - a);
    const double ed = std::exp(d);
    const double ec = std::exp(c);
    return (std::cos(ud) * ed - std::cos(uc) * ec + k_omega * (std::sin(ud) * ed - std::sin(uc) * ec)) /
           (1.0 + k_omega * k_omega);
}

// int_c^d cos(k w (y - a)) dy
inline double psi(double k_omega, double a, double c, double d) {
    if (!(c < d)) return 0.0;
    if (k_omega == 0.0) return d - c;
    return (std::sin(k_omega * (d - a)) - std::sin(k_omega * (c - a))) / k_omega;
}

// Cosine coefficient (2/(b-a)) int_c^d (scale e^y - strike) sign cos(...) dy.
// Call: sign = +1 gives (s e^y - K); put: sign = -1 gives (K - s e^y).
inline double payoff_coeff(double k_omega, double a, double b, double c, double d, double scale, double strike,
                           double sign) {
    return 2.0 / (b - a) * sign * (scale * chi(k_omega, a, c, d) - strike * psi(k_omega, a, c, d));
}

}  // namespace dce::cos_detail
