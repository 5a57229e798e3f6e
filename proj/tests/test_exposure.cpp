#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "dce/errors.hpp"
#include "dce/exposure.hpp"
#include "dce/parallel.hpp"
#include "oracles.hpp"

using namespace dce;

namespace {

// Held values from an arbitrary function of (t, x).
class FnValuer : public PathValuer {
  public:
    FnValuer(std::vector<double> grid, std::function<double(double, double)> f) : grid_(std::move(grid)), f_(std::move(f)) {}
    const std::vector<double>& grid() const override { return grid_; }
    void held_value(std::size_t u, std::span<const double> xs, std::span<double> out) const override {
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f_(grid_[u], xs[i]);
    }

  private:
    std::vector<double> grid_;
    std::function<double(double, double)> f_;
};

BermudanSpec bermudan_put(std::size_t dates) {
    BermudanSpec s;
    s.exercise_dates = uniform_dates(1.0, dates);
    return s;
}

}  // namespace

TEST(Pfe, MatchesBruteForceOrderStatistic) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (std::size_t m : {1u, 2u, 7u, 40u, 1000u, 4001u}) {
        for (double alpha : {0.5, 0.9, 0.975, 0.99}) {
            std::vector<double> v(m);
            for (auto& x : v) x = std::max(0.0, std::round(4.0 * n01(rng)) / 4.0);  // many ties
            EXPECT_EQ(pfe_quantile(v, alpha), oracle::order_statistic(v, alpha)) << "m=" << m << " alpha=" << alpha;
        }
    }
    std::vector<double> empty;
    EXPECT_THROW(pfe_quantile(empty, 0.9), DataError);
    std::vector<double> one{1.0};
    EXPECT_THROW(pfe_quantile(one, 1.0), ParameterError);
}

TEST(Pfe, ExactQuantileBoundary) {
    // M alpha = 975 exactly: the 975th smallest value
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(999 - i);
    EXPECT_EQ(pfe_quantile(v, 0.975), 974.0);
}

TEST(Mean, DeterministicAndAccurate) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(100003);
    long double ref = 0;
    for (auto& x : v) {
        x = u(rng);
        ref += x;
    }
    EXPECT_NEAR(deterministic_mean(v), static_cast<double>(ref / v.size()), 1e-15);
    EXPECT_EQ(deterministic_mean(v), deterministic_mean(v));
    EXPECT_EQ(deterministic_mean(std::vector<double>{}), 0.0);
}

TEST(Exposure, AbsorptionAfterExerciseAndNonNegativity) {
    const BlackScholesParams bs;
    const Product berm(bermudan_put(10), bs);
    const auto grid = make_time_grid(1.0, 50.0);
    const auto ens = simulate(bs, Measure::RealWorld, 3000, grid, 4);
    // small continuation deep in the money; negative values get floored
    auto cont = [](double x) { return x < -0.1 ? 1.0 : 12.0 * std::exp(-4 * x) - 9.0; };
    FnValuer v(grid, [&](double, double x) { return cont(x); });
    ExposureOptions opt;
    opt.retain_matrix = true;
    const auto p = compute_exposure(v, ens, berm, bs, opt);
    ASSERT_EQ(p.exposure_matrix.size(), grid.size() * ens.paths);
    EXPECT_FALSE(p.discounted);
    for (std::size_t i = 0; i < ens.paths; ++i) {
        bool dead = false;
        for (std::size_t u = 0; u < grid.size(); ++u) {
            const double e = p.exposure(i, u);
            EXPECT_GE(e, 0.0);
            if (dead) EXPECT_EQ(e, 0.0) << "path " << i << " revived at u=" << u;
            const bool exercise_date = (u % 5 == 0) && u > 0;
            const double g = berm.intrinsic(grid[u], ens(i, u));
            if (!dead && exercise_date && g > 0.0 && g >= cont(ens(i, u))) {
                EXPECT_EQ(e, g);
                dead = true;
            }
        }
    }
    for (std::size_t u = 1; u < grid.size(); ++u) EXPECT_LE(p.alive_counts[u], p.alive_counts[u - 1]);
    EXPECT_LT(p.alive_counts.back(), ens.paths);
}

TEST(Exposure, BarrierKnockoutIsPermanent) {
    const BlackScholesParams bs;
    BarrierUpOutSpec spec;
    spec.monitoring_dates = uniform_dates(1.0, 50);
    const Product bar(spec, bs);
    const auto grid = make_time_grid(1.0, 50.0);
    const auto ens = simulate(bs, Measure::RealWorld, 2000, grid, 8);
    FnValuer v(grid, [](double, double) { return 1.0; });
    ExposureOptions opt;
    opt.retain_matrix = true;
    const auto p = compute_exposure(v, ens, bar, bs, opt);
    std::size_t knocked = 0;
    for (std::size_t i = 0; i < ens.paths; ++i) {
        bool out = false;
        for (std::size_t u = 0; u < grid.size(); ++u) {
            if (u > 0 && ens(i, u) > bar.log_barrier()) out = true;
            EXPECT_EQ(p.exposure(i, u), out ? 0.0 : 1.0);
        }
        knocked += out;
    }
    EXPECT_GT(knocked, 0u);
    EXPECT_EQ(p.alive_counts.back(), ens.paths - knocked);
}

TEST(Exposure, ProfileStatisticsEqualMatrixColumns) {
    const BlackScholesParams bs;
    const Product eu(EuropeanSpec{}, bs);
    const auto grid = make_time_grid(1.0, 20.0);
    const auto ens = simulate(bs, Measure::RiskNeutral, 1501, grid, 2);
    FnValuer v(grid, [](double t, double x) { return std::max(0.0, 100.0 - 100.0 * std::exp(x)) + (1.0 - t); });
    ExposureOptions opt;
    opt.retain_matrix = true;
    opt.alpha = 0.95;
    const auto p = compute_exposure(v, ens, eu, bs, opt);
    EXPECT_TRUE(p.discounted);
    for (std::size_t u = 0; u < grid.size(); ++u) {
        std::vector<double> col(ens.paths);
        long double s = 0;
        for (std::size_t i = 0; i < ens.paths; ++i) {
            col[i] = p.exposure(i, u);
            const double undiscounted = std::max(0.0, 100.0 - 100.0 * std::exp(ens(i, u))) + (1.0 - grid[u]);
            EXPECT_NEAR(col[i], std::exp(-bs.r * grid[u]) * undiscounted, 1e-12);
            s += col[i];
        }
        EXPECT_NEAR(p.ee[u], static_cast<double>(s / ens.paths), 1e-12);
        EXPECT_EQ(p.pfe[u], oracle::order_statistic(col, 0.95));
        EXPECT_EQ(p.alive_counts[u], ens.paths);
    }
}

TEST(Exposure, IndependentOfThreadCount) {
    const MertonParams mj;
    const Product berm(bermudan_put(10), mj);
    const auto grid = make_time_grid(1.0, 50.0);
    const auto ens = simulate(mj, Measure::RiskNeutral, 5000, grid, 4);
    FnValuer v(grid, [](double t, double x) { return 10.0 * std::exp(-x) * (1.2 - t); });
    set_thread_count(1);
    const auto a = compute_exposure(v, ens, berm, mj);
    set_thread_count(3);
    const auto b = compute_exposure(v, ens, berm, mj);
    set_thread_count(0);
    EXPECT_EQ(a.ee, b.ee);
    EXPECT_EQ(a.pfe, b.pfe);
    EXPECT_EQ(a.alive_counts, b.alive_counts);
}

TEST(Exposure, RejectsMismatchedInputs) {
    const BlackScholesParams bs;
    const Product eu(EuropeanSpec{}, bs);
    const auto grid = make_time_grid(1.0, 50.0);
    const auto ens = simulate(bs, Measure::RiskNeutral, 100, make_time_grid(1.0, 25.0), 1);
    FnValuer v(grid, [](double, double) { return 1.0; });
    EXPECT_THROW(compute_exposure(v, ens, eu, bs), ConfigurationError);

    ExposureAccumulator acc(eu, grid, 4, Measure::RealWorld, {});
    std::vector<double> xs(4, 0.0), held(4, 1.0);
    EXPECT_THROW(acc.step(1, xs, held, {}), ConfigurationError);
    acc.step(0, xs, held, {});
    EXPECT_THROW(acc.finish(), ConfigurationError);
    ExposureOptions bad;
    bad.alpha = 1.5;
    EXPECT_THROW(ExposureAccumulator(eu, grid, 4, Measure::RealWorld, bad), ParameterError);
}

TEST(Cva, WeightedSumOfExpectedExposure) {
    ExposureProfile p;
    p.times = {0.0, 0.5, 1.0};
    p.ee = {5.0, 4.0, 2.0};
    const std::vector<double> q{0.01, 0.02};
    EXPECT_NEAR(cva_from_profile(p, q, 0.4), 0.6 * (4.0 * 0.01 + 2.0 * 0.02), 1e-15);
    const std::vector<double> full{0.0, 0.01, 0.02};
    EXPECT_NEAR(cva_from_profile(p, full, 0.0), 0.08, 1e-15);
    EXPECT_THROW(cva_from_profile(p, std::vector<double>{0.1}, 0.0), DataError);
    EXPECT_THROW(cva_from_profile(p, std::vector<double>{-0.1, 0.1}, 0.0), DataError);
    EXPECT_THROW(cva_from_profile(p, std::vector<double>{0.7, 0.7}, 0.0), DataError);
    EXPECT_THROW(cva_from_profile(p, q, 1.5), ParameterError);
}
