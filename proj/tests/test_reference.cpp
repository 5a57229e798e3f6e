#include <cmath>

#include <gtest/gtest.h>

#include "dce/errors.hpp"
#include "dce/reference.hpp"
#include "oracles.hpp"

using namespace dce;

namespace {

const auto kGrid = make_time_grid(1.0, 50.0);
constexpr double kDt = 0.02;

BermudanSpec bermudan_put(std::size_t dates) {
    BermudanSpec s;
    s.exercise_dates = uniform_dates(1.0, dates);
    return s;
}

oracle::Kind kind_of(OptionKind k) { return k == OptionKind::Put ? oracle::Kind::Put : oracle::Kind::Call; }

}  // namespace

TEST(ClosedForm, BlackScholesAgainstOracle) {
    for (auto kind : {OptionKind::Put, OptionKind::Call}) {
        for (double s : {60.0, 95.0, 100.0, 140.0}) {
            for (double tau : {0.05, 0.5, 2.0}) {
                EXPECT_NEAR(bs_european(s, 100, 0.03, 0.25, tau, kind), oracle::bs_price(s, 100, 0.03, 0.25, tau, kind_of(kind)), 1e-12);
                EXPECT_NEAR(bs_delta(s, 100, 0.03, 0.25, tau, kind), oracle::bs_delta(s, 100, 0.03, 0.25, tau, kind_of(kind)), 1e-12);
            }
        }
    }
    EXPECT_NEAR(bs_gamma(90, 100, 0.03, 0.25, 0.7), oracle::bs_gamma(90, 100, 0.03, 0.25, 0.7), 1e-14);
    EXPECT_THROW(bs_european(100, 100, 0.03, 0.25, -0.1, OptionKind::Put), ParameterError);
}

TEST(ClosedForm, CappedCallIsCallSpreadMinusDigital) {
    // (S-K) 1{K < S <= B} = (S-K)+ - (S-B)+ - (B-K) 1{S > B}
    const double s = 100, k = 100, b = 130, r = 0.03, sig = 0.25, tau = 0.6;
    const double d2 = (std::log(s / b) + (r - 0.5 * sig * sig) * tau) / (sig * std::sqrt(tau));
    const double expect = oracle::bs_price(s, k, r, sig, tau, oracle::Kind::Call) -
                          oracle::bs_price(s, b, r, sig, tau, oracle::Kind::Call) -
                          (b - k) * std::exp(-r * tau) * oracle::normal_cdf(d2);
    EXPECT_NEAR(bs_capped_call(s, k, b, r, sig, tau), expect, 1e-12);
}

TEST(CosEuropean, MatchesBlackScholes) {
    const BlackScholesParams bs;
    for (double tau : {0.02, 0.5, 1.0}) {
        const auto law = bs_law(bs, tau);
        for (auto kind : {OptionKind::Put, OptionKind::Call}) {
            for (double s : {70.0, 100.0, 125.0}) {
                CosDiagnostics diag;
                const double v = cos_european(law, s, 100, bs.r, tau, kind, {}, INFINITY, &diag);
                EXPECT_NEAR(v, oracle::bs_price(s, 100, bs.r, bs.sigma, tau, kind_of(kind)), 1e-8) << "tau=" << tau << " s=" << s;
                EXPECT_TRUE(diag.converged);
            }
        }
    }
}

TEST(CosEuropean, MatchesMertonSeries) {
    const MertonParams mj;
    for (double tau : {0.25, 1.0}) {
        const auto law = merton_law(mj, tau);
        for (auto kind : {OptionKind::Put, OptionKind::Call}) {
            for (double s : {80.0, 100.0, 120.0}) {
                const double expect =
                    oracle::merton_price(s, 100, mj.r, mj.sigma, tau, mj.intensity, mj.jump_mean, mj.jump_std, kind_of(kind));
                EXPECT_NEAR(cos_european(law, s, 100, mj.r, tau, kind), expect, 1e-8);
            }
        }
    }
}

TEST(CosEuropean, KnockoutLevelGivesCappedCall) {
    const BlackScholesParams bs;
    const double tau = 0.6;
    const double v = cos_european(bs_law(bs, tau), 100, 100, bs.r, tau, OptionKind::Call, {}, std::log(1.3));
    EXPECT_NEAR(v, bs_capped_call(100, 100, 130, bs.r, bs.sigma, tau), 1e-8);
}

TEST(CosEuropean, Guards) {
    const BlackScholesParams bs;
    EXPECT_THROW(equity_law(HullWhiteParams{}, 1.0), ConfigurationError);
    CosConfig c;
    c.terms = 1;
    EXPECT_THROW(cos_european(bs_law(bs, 1.0), 100, 100, 0.03, 1.0, OptionKind::Put, c), ParameterError);
    const Product sw(yearly_swaption(0.01094, 100, 5), HullWhiteParams{});
    EXPECT_THROW(cos_backward_reference(HullWhiteParams{}, sw, make_time_grid(5.0, 50.0)), ConfigurationError);
}

TEST(CosBackward, EuropeanReducesToClosedForm) {
    const BlackScholesParams bs;
    const Product eu(EuropeanSpec{}, bs);
    const auto ref = cos_backward_reference(bs, eu, kGrid);
    EXPECT_NEAR(ref.price(), oracle::bs_price(100, 100, bs.r, bs.sigma, 1.0, oracle::Kind::Put), 1e-8);
    for (std::size_t u : {10u, 40u}) {
        for (double x : {-0.3, 0.0, 0.25}) {
            EXPECT_NEAR(ref.held(u, x), oracle::bs_price(100 * std::exp(x), 100, bs.r, bs.sigma, 1.0 - kGrid[u], oracle::Kind::Put), 1e-8);
        }
    }
    EXPECT_NEAR(ref.held(50, -0.2), 100 - 100 * std::exp(-0.2), 1e-12);
}

TEST(CosBackward, BermudanPutAgreesWithLattice) {
    const BlackScholesParams bs;
    const Product pb(bermudan_put(10), bs);
    const auto ref = cos_backward_reference(bs, pb, kGrid);
    oracle::EquityCase oc;
    oc.bermudan = true;
    oc.decision.assign(51, false);
    for (std::size_t u = 5; u <= 50; u += 5) oc.decision[u] = true;
    const double lattice = oracle::richardson_at_zero(0.0025, 0.00125, 2.25, INFINITY, [&](const oracle::Lattice& g) {
        const auto k = oracle::kernel(g, 1.0, oracle::gaussian((bs.r - 0.5 * bs.sigma * bs.sigma) * kDt, bs.sigma * bs.sigma * kDt));
        return g.at(oracle::equity_lattice(g, k, oc)[0], 0.0);
    });
    EXPECT_NEAR(ref.price(), lattice, 2e-4);
    // a put boundary sits below the strike at exercise dates only
    EXPECT_LT(ref.exercise_boundary(25), 0.0);
    EXPECT_TRUE(std::isnan(ref.exercise_boundary(24)));
}

TEST(CosBackward, BarrierCallAgreesWithLattice) {
    const BlackScholesParams bs;
    BarrierUpOutSpec spec;
    spec.monitoring_dates = uniform_dates(1.0, 50);
    const Product pb(spec, bs);
    const auto ref = cos_backward_reference(bs, pb, kGrid);
    oracle::EquityCase oc;
    oc.kind = oracle::Kind::Call;
    oc.decision.assign(51, true);
    oc.log_barrier = pb.log_barrier();
    const double lattice = oracle::richardson_at_zero(oc.log_barrier / 104.5, oc.log_barrier / 208.5, 2.25, oc.log_barrier,
                                                      [&](const oracle::Lattice& g) {
        const auto k = oracle::kernel(g, 1.0, oracle::gaussian((bs.r - 0.5 * bs.sigma * bs.sigma) * kDt, bs.sigma * bs.sigma * kDt));
        return g.at(oracle::equity_lattice(g, k, oc)[0], 0.0);
    });
    EXPECT_NEAR(ref.price(), lattice, 2e-5);
    // held values are continuation values; knockout belongs to the path bookkeeping
    const double lb = pb.log_barrier();
    EXPECT_NEAR(ref.held(20, lb - 1e-6), ref.held(20, lb + 1e-6), 1e-4);
}

TEST(CosBackward, MertonBermudanAgreesWithLattice) {
    const MertonParams mj;
    const Product pb(bermudan_put(50), mj);
    const auto ref = cos_backward_reference(mj, pb, kGrid);
    oracle::EquityCase oc;
    oc.bermudan = true;
    oc.decision.assign(51, true);
    const auto mix = oracle::merton_increment(mj.sigma, mj.r, mj.intensity, mj.jump_mean, mj.jump_std, kDt);
    oracle::Lattice g{-(1250 + 0.5) * 0.004, 0.004, 1750};
    const auto v = oracle::equity_lattice(g, oracle::kernel(g, 1.0, mix), oc);
    EXPECT_NEAR(ref.price(), g.at(v[0], 0.0), 5e-4);
}

TEST(CosBackward, DoublingTermsIsStable) {
    const BlackScholesParams bs;
    const Product pb(bermudan_put(10), bs);
    CosBackwardConfig more;
    more.terms = 8192;
    const double a = cos_backward_reference(bs, pb, kGrid).price();
    const double b = cos_backward_reference(bs, pb, kGrid, more).price();
    EXPECT_LT(std::fabs(a - b), 1e-6);
}

TEST(AnalyticValuer, ClosedFormAlongPaths) {
    const BlackScholesParams bs;
    EuropeanSpec spec;
    spec.kind = OptionKind::Call;
    AnalyticEuropeanValuer v(bs, spec, kGrid);
    const std::vector<double> xs{-0.4, 0.0, 0.3};
    std::vector<double> out(3);
    for (std::size_t u : {0u, 17u, 50u}) {
        v.held_value(u, xs, out);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_NEAR(out[i], oracle::bs_price(100 * std::exp(xs[i]), 100, bs.r, bs.sigma, 1.0 - kGrid[u], oracle::Kind::Call), 1e-12);
        }
    }
}

TEST(FullReevaluation, DiscountedMeanOfClosedForm) {
    const BlackScholesParams bs;
    const Product eu(EuropeanSpec{}, bs);
    const auto grid = make_time_grid(1.0, 10.0);
    const auto ens = simulate(bs, Measure::RiskNeutral, 2000, grid, 5);
    AnalyticEuropeanValuer v(bs, EuropeanSpec{}, grid);
    const auto p = full_reevaluation_exposure(v, ens, eu, bs);
    EXPECT_EQ(p.method, "full_reeval");
    for (std::size_t u = 0; u < grid.size(); ++u) {
        long double s = 0;
        for (std::size_t i = 0; i < ens.paths; ++i) {
            s += std::exp(-bs.r * grid[u]) *
                 oracle::bs_price(100 * std::exp(ens(i, u)), 100, bs.r, bs.sigma, 1.0 - grid[u], oracle::Kind::Put);
        }
        EXPECT_NEAR(p.ee[u], static_cast<double>(s / ens.paths), 1e-11);
    }
    // martingale: discounted mean stays near the time-zero price
    EXPECT_NEAR(p.ee[5], p.ee[0], 5.0 * p.ee_stderr[5]);
}

TEST(ProfileError, MaxNormalisedDifference) {
    ExposureProfile a, b;
    a.times = b.times = {0.0, 0.5, 1.0};
    a.ee = {1.0, 2.0, 3.0};
    b.ee = {1.0, 2.5, 2.9};
    a.pfe = {2.0, 4.0, 6.0};
    b.pfe = {2.2, 4.0, 5.0};
    const auto e = profile_error(a, b, 10.0);
    EXPECT_NEAR(e.ee, 0.05, 1e-15);
    EXPECT_NEAR(e.pfe, 0.1, 1e-15);
    b.times = {0.0, 0.5, 0.9};
    EXPECT_THROW(profile_error(a, b, 1.0), ConfigurationError);
    b.times = {0.0, 1.0};
    EXPECT_THROW(profile_error(a, b, 1.0), ConfigurationError);
    EXPECT_THROW(profile_error(a, a, 0.0), ParameterError);
}
