#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "seqcpd/model.hpp"

using namespace seqcpd;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<long>(v.size()));
    long i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

double mean_of(const Series& s) {
    return std::accumulate(s.values().begin(), s.values().end(), 0.0) / s.size();
}

double lag1_autocorr(const Series& s) {
    const double m = mean_of(s);
    double num = 0.0, den = 0.0;
    for (long t = 1; t <= s.size(); ++t) {
        den += (s(t) - m) * (s(t) - m);
        if (t > 1) num += (s(t) - m) * (s(t - 1) - m);
    }
    return num / den;
}

}  // namespace

TEST_CASE("stationarity checks per family") {
    ModelSpec ar1 = ModelSpec::ar(1);  // intercept + one lag
    CHECK(check_stationarity(ar1, vec({0.0, 0.2})));
    CHECK_FALSE(check_stationarity(ar1, vec({0.0, 1.0})));

    ModelSpec ar1z = ModelSpec::ar(1, false);
    CHECK(check_stationarity(ar1z, vec({0.2})));
    CHECK_FALSE(check_stationarity(ar1z, vec({-1.0})));

    ModelSpec g = ModelSpec::garch11();
    CHECK(check_stationarity(g, vec({0.01, 0.3, 0.2})));
    CHECK_FALSE(check_stationarity(g, vec({0.01, 0.6, 0.4})));
    CHECK_THROWS_AS(check_stationarity(g, vec({0.0, 0.3, 0.2})), std::invalid_argument);

    ModelSpec ms = ModelSpec::mean_shift(g, vec({0.01, 0.3, 0.2}));
    CHECK(check_stationarity(ms, vec({0.7})));

    CHECK_THROWS_AS(check_stationarity(ar1, vec({0.1})), std::invalid_argument);
}

TEST_CASE("conditional moments: degenerate and hand-computed cases") {
    ModelSpec g = ModelSpec::garch11();
    Series past(std::vector<double>{1.0, -2.0, 0.5});

    // alpha_1 = beta_1 = 0 collapses to constant variance alpha_0.
    auto cm = conditional_moments(g, vec({0.04, 0.0, 0.0}), past, 3);
    CHECK(cm.mean == doctest::Approx(0.0));
    CHECK(cm.variance == doctest::Approx(0.04));

    // One lag of data: h = a0/(1-b1) + a1 X_1^2.
    cm = conditional_moments(g, vec({0.01, 0.3, 0.2}), Series(std::vector<double>{1.0}), 2);
    CHECK(cm.variance == doctest::Approx(0.01 / 0.8 + 0.3));

    ModelSpec ar1 = ModelSpec::ar(1);
    cm = conditional_moments(ar1, vec({0.0, 0.0}), past, 4);
    CHECK(cm.mean == doctest::Approx(0.0));
    CHECK(cm.variance == doctest::Approx(1.0));

    // Truncation: at t = 1 no lags are available.
    cm = conditional_moments(ar1, vec({0.5, 0.9}), past, 1);
    CHECK(cm.mean == doctest::Approx(0.5));

    CHECK_THROWS_AS(conditional_moments(ar1, vec({0.0, 0.0}), past, 5), std::invalid_argument);
}

TEST_CASE("GARCH truncated variance converges geometrically in the available past") {
    ModelSpec g = ModelSpec::garch11();
    Eigen::VectorXd th = vec({0.05, 0.25, 0.6});
    ChangeScenario sc;
    sc.theta0 = th;
    sc.n = 400;
    sc.horizon = 0;
    Series x = simulate(g, sc, 99, 500);

    // h at t computed from only the last m observations approaches the
    // full-history value at rate beta^m.
    const long t = 400;
    const double full = conditional_moments(g, th, x, t).variance;
    double prev_err = -1.0;
    for (long m : {5L, 10L, 20L, 40L}) {
        Series tail = x.slice(t - m, t - 1);
        const double approx = conditional_moments(g, th, tail, m + 1).variance;
        const double err = std::abs(approx - full);
        if (prev_err >= 0.0) CHECK(err <= prev_err + 1e-12);
        prev_err = err;
    }
    CHECK(prev_err <= std::pow(0.6, 35));
}

TEST_CASE("simulate: reproducibility and H0 equivalences") {
    ModelSpec g = ModelSpec::garch11();
    ChangeScenario h0;
    h0.theta0 = vec({0.01, 0.3, 0.2});
    h0.n = 100;
    h0.horizon = 50;

    Series a = simulate(g, h0, 7);
    Series b = simulate(g, h0, 7);
    CHECK(a.values() == b.values());  // bit reproducibility

    ChangeScenario same = h0;
    same.theta1 = h0.theta0;
    same.k_star = 120;
    Series c = simulate(g, same, 7);
    CHECK(a.values() == c.values());

    Series d = simulate(g, h0, 8);
    CHECK(a.values() != d.values());
}

TEST_CASE("simulate: degenerate models reduce to the innovation stream") {
    // AR(1) with zero parameters is white noise.
    ModelSpec ar1 = ModelSpec::ar(1);
    ChangeScenario sc;
    sc.theta0 = vec({0.0, 0.0});
    sc.n = 200;
    sc.horizon = 0;
    Series w = simulate(ar1, sc, 3, 0);

    // GARCH with alpha_1 = beta_1 = 0 is sqrt(c) times the same innovations.
    ModelSpec g = ModelSpec::garch11();
    ChangeScenario gc;
    gc.theta0 = vec({4.0, 0.0, 0.0});
    gc.n = 200;
    gc.horizon = 0;
    Series v = simulate(g, gc, 3, 0);
    for (long t = 1; t <= 200; ++t) CHECK(v(t) == doctest::Approx(2.0 * w(t)).epsilon(1e-12));
}

TEST_CASE("simulate: AR(1) long-run mean and autocorrelation match theory") {
    ModelSpec ar1 = ModelSpec::ar(1);
    ChangeScenario sc;
    sc.theta0 = vec({0.5, 0.2});  // mean = 0.5 / (1 - 0.2) = 0.625
    sc.n = 100000;
    sc.horizon = 0;
    Series x = simulate(ar1, sc, 11);

    // 3 standard errors of the mean of an AR(1): sd ~ sqrt((1/n) * 1/(1-phi)^2)
    const double se = std::sqrt(1.0 / ((1 - 0.2) * (1 - 0.2)) / 100000.0);
    CHECK(std::abs(mean_of(x) - 0.625) <= 3.0 * se);
    CHECK(std::abs(lag1_autocorr(x) - 0.2) <= 0.01);
}

TEST_CASE("simulate: change scenario switches the recursion after k_star") {
    ModelSpec ar1 = ModelSpec::ar(1, false);
    ChangeScenario sc;
    sc.theta0 = vec({0.2});
    sc.theta1 = vec({-0.5});
    sc.k_star = 150;
    sc.n = 100;
    sc.horizon = 200;
    Series x = simulate(ar1, sc, 21);
    Series pre = x.slice(1, 150);
    Series post = x.slice(151, 300);
    CHECK(lag1_autocorr(pre) > -0.1);
    CHECK(lag1_autocorr(post) < -0.2);

    CHECK_THROWS_AS(simulate(ar1, [&] {
        ChangeScenario bad = sc;
        bad.k_star = 50;  // not after the historical window
        return bad;
    }(), 1), std::invalid_argument);

    CHECK_THROWS_AS(simulate(ar1, [&] {
        ChangeScenario bad = sc;
        bad.theta1 = vec({1.5});  // nonstationary
        return bad;
    }(), 1), std::invalid_argument);
}
