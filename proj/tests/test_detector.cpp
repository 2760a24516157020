#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "seqcpd/detector.hpp"
#include "seqcpd/model.hpp"

using namespace seqcpd;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<long>(v.size()));
    long i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Series sim_h0(const ModelSpec& m, const Eigen::VectorXd& th, long len, std::uint64_t seed) {
    ChangeScenario sc;
    sc.theta0 = th;
    sc.n = len;
    sc.horizon = 0;
    return simulate(m, sc, seed);
}

}  // namespace

TEST_CASE("scan set arithmetic from the worked examples") {
    // n = 500: v_n = floor((log 500)^{3/2}) = 15, u_n = floor(log 500) = 6.
    CHECK(v_length(500, 1.5) == 15);
    CHECK(u_length(500) == 6);

    std::vector<long> pts = scan_points(500, 560, 15, 6);
    REQUIRE(pts.size() >= 3);
    CHECK(pts[0] == 485);
    CHECK(pts[1] == 491);
    CHECK(pts[2] == 497);
    CHECK(pts.back() <= 545);

    // k = n + 1 truncates to the single starting point.
    std::vector<long> first = scan_points(500, 501, 15, 6);
    CHECK(first == std::vector<long>{485});

    // u_n = 1 gives the full range.
    std::vector<long> full = scan_points(500, 510, 15, 1);
    CHECK(full.front() == 485);
    CHECK(full.back() == 495);
    CHECK(full.size() == 11);

    CHECK_THROWS_AS(scan_points(500, 500, 15, 6), std::invalid_argument);
}

TEST_CASE("detector statistic: zero, scalar case, weight linearity") {
    FitResult hist;
    hist.theta_hat = vec({0.0});
    hist.normalizer = Eigen::MatrixXd::Identity(1, 1);

    CHECK(detector_stat(hist, vec({0.0}), 100, 200, 100) == doctest::Approx(0.0));
    // d = 1, unit normalizer: sqrt(100) * (100/200) * 0.5 = 2.5.
    CHECK(detector_stat(hist, vec({0.5}), 100, 200, 100) == doctest::Approx(2.5));
    // Doubling (k - l)/k doubles the statistic at a fixed difference.
    const double a = detector_stat(hist, vec({0.5}), 100, 400, 300);  // weight 1/4
    const double b = detector_stat(hist, vec({0.5}), 100, 400, 200);  // weight 1/2
    CHECK(b == doctest::Approx(2.0 * a));
    CHECK_THROWS_AS(detector_stat(hist, vec({0.5}), 100, 200, 200), std::invalid_argument);

    // Known-parameter variant re-centers the difference.
    CHECK(detector_stat_at(hist, vec({0.5}), vec({0.5}), 100, 200, 100) == doctest::Approx(0.0));
}

TEST_CASE("detector statistic is invariant under rotations of the normalizer") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    FitResult hist;
    hist.theta_hat = vec({0.1, -0.2, 0.3});
    Eigen::MatrixXd N(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) N(i, j) = nd(gen);
    hist.normalizer = N;

    // Householder reflection as an exactly orthogonal matrix.
    Eigen::Vector3d v(nd(gen), nd(gen), nd(gen));
    v.normalize();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(3, 3) - 2.0 * v * v.transpose();

    FitResult rot = hist;
    rot.normalizer = Q * N;
    Eigen::VectorXd theta = vec({0.4, 0.1, -0.5});
    CHECK(detector_stat(hist, theta, 200, 260, 210) ==
          doctest::Approx(detector_stat(rot, theta, 200, 260, 210)).epsilon(1e-12));
}

TEST_CASE("na detector vanishes at k = n") {
    FitResult hist;
    hist.theta_hat = vec({0.3, 0.1});
    hist.normalizer = Eigen::MatrixXd::Identity(2, 2);
    CHECK(na_detector(hist, hist.theta_hat, 500) == doctest::Approx(0.0));
}

TEST_CASE("monitor: stepwise and batch runs agree and are online") {
    ModelSpec ar1 = ModelSpec::ar(1, false);
    Series path = sim_h0(ar1, vec({0.2}), 640, 42);
    Series hist = path.slice(1, 500);
    Series stream = path.slice(501, 640);

    ScanConfig cfg;
    cfg.v_exponent = 1.5;
    cfg.horizon = 140;

    MonitorOutcome batch = monitor(ar1, hist, stream, cfg);

    Monitor m(ar1, hist, cfg);
    for (long i = 1; i <= stream.size() && !m.terminal(); ++i) m.step(stream(i));
    MonitorOutcome st = m.outcome();

    REQUIRE(batch.trajectory.size() == st.trajectory.size());
    for (std::size_t i = 0; i < batch.trajectory.size(); ++i) {
        CHECK(batch.trajectory[i].stat == st.trajectory[i].stat);
        CHECK(batch.trajectory[i].k == st.trajectory[i].k);
    }
}

TEST_CASE("monitor: stream identical to history stays quiet") {
    // Repeating the historical segment keeps window estimates equal to the
    // historical one, so the detector stays near zero.
    ModelSpec ar1 = ModelSpec::ar(1, false);
    Series hist = sim_h0(ar1, vec({0.2}), 500, 7);
    std::vector<double> rep;
    for (long t = 401; t <= 500; ++t) rep.push_back(hist(t));
    for (long t = 401; t <= 500; ++t) rep.push_back(hist(t));
    Series stream(rep);

    ScanConfig cfg;
    cfg.boundary = Boundary::constant(1.954);
    cfg.horizon = 200;
    MonitorOutcome mo = monitor(ar1, hist, stream, cfg);
    CHECK_FALSE(mo.stopped);
    for (const StepRecord& r : mo.trajectory) CHECK(r.stat < 1.954);
}

TEST_CASE("monitor: large GARCH change is caught quickly") {
    ModelSpec g = ModelSpec::garch11();
    ChangeScenario sc;
    sc.theta0 = vec({0.01, 0.3, 0.2});
    sc.theta1 = vec({0.05, 0.5, 0.2});
    sc.k_star = 750;
    sc.n = 500;
    sc.horizon = 500;
    Series path = simulate(g, sc, 99);

    ScanConfig cfg;
    cfg.v_exponent = 2.0;  // ARCH-type recommendation
    cfg.horizon = 500;
    MonitorOutcome mo =
        monitor(g, path.slice(1, 500), path.slice(501, 1000), cfg, 750);
    REQUIRE(mo.stopped);
    CHECK(*mo.tau > 750);
    CHECK(*mo.delay < 250);

    // Eq-15 reduction: with a constant boundary the crossing decision at each
    // step is exactly stat > c.
    const double c = quantile(QuantileTable::builtin(), Functional::UdWeighted, 3, 0.05);
    for (const StepRecord& r : mo.trajectory) CHECK(r.crossed == (r.stat > c));
}

TEST_CASE("scan thinning: max over the thinned set never exceeds the full scan") {
    ModelSpec ar1 = ModelSpec::ar(1, false);
    Series path = sim_h0(ar1, vec({0.2}), 560, 17);
    Series hist = path.slice(1, 500);
    FitResult hf = fit(ar1, hist, Window{1, 500});

    Series buffer = hist;
    for (long t = 501; t <= 560; ++t) buffer.append(path(t));
    const long k = 560, n = 500, vn = 15;

    auto max_over = [&](long un) {
        double best = 0.0;
        for (long l : scan_points(n, k, vn, un)) {
            FitResult fr = fit(ar1, buffer, Window{l, k}, hf.theta_hat);
            best = std::max(best, detector_stat(hf, fr.theta_hat, n, k, l));
        }
        return best;
    };
    const double thinned = max_over(6);
    const double full = max_over(1);
    CHECK(thinned <= full + 1e-12);

    // Scan subset relation.
    std::vector<long> p0 = scan_points(n, k, vn, 6);
    std::vector<long> p = scan_points(n, k, vn, 1);
    for (long l : p0) CHECK(std::find(p.begin(), p.end(), l) != p.end());
}

TEST_CASE("long-run variance: iid, Bartlett bandwidth zero, AR oracle") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    std::vector<double> iid(10000);
    for (double& x : iid) x = nd(gen);
    const double emp = long_run_variance(iid, VarianceMethod::Empirical);
    // chi-square sampling error: sd of the sample variance ~ sqrt(2/n)
    CHECK(std::abs(emp - 1.0) <= 3.0 * std::sqrt(2.0 / 10000.0));

    const double bart0 = long_run_variance(iid, VarianceMethod::Bartlett, 0);
    CHECK(bart0 == doctest::Approx(emp * (10000.0 - 1.0) / 10000.0).epsilon(1e-12));

    // AR(1) with phi = 0.2: long-run variance = 1 / (1 - phi)^2.
    ModelSpec ar1 = ModelSpec::ar(1, false);
    Series x = sim_h0(ar1, vec({0.2}), 100000, 23);
    const double lrv = long_run_variance(x.values(), VarianceMethod::Bartlett);
    CHECK(std::abs(lrv - 1.0 / 0.64) / (1.0 / 0.64) <= 0.05);

    CHECK_THROWS_AS(long_run_variance({1.0}, VarianceMethod::Empirical), std::invalid_argument);
}

TEST_CASE("CUSUM detector: zero stream, hand value, monitor alarm") {
    Series hist(std::vector<double>{1.0, -1.0, 1.0, -1.0, 1.0, -1.0});  // mean 0
    std::vector<double> zeros(4, 0.0);
    CHECK(cusum_detector(hist, zeros, 0.0, 1.0) == doctest::Approx(0.0));

    // k = n + 2, sum = 2, sigma = 1, gamma onto 0: |2| / (sqrt(6) * (8/6)).
    std::vector<double> ones{1.0, 1.0};
    CHECK(cusum_detector(hist, ones, 0.0, 1.0) ==
          doctest::Approx(2.0 / (std::sqrt(6.0) * (8.0 / 6.0))));
    CHECK_THROWS_AS(cusum_detector(hist, ones, 0.6, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cusum_detector(hist, ones, 0.0, -1.0), std::invalid_argument);

    // Mean shift in GARCH noise triggers the CUSUM monitor.
    ModelSpec noise = ModelSpec::garch11();
    ModelSpec ms = ModelSpec::mean_shift(noise, vec({0.01, 0.3, 0.2}));
    ChangeScenario sc;
    sc.theta0 = vec({0.0});
    sc.theta1 = vec({0.3});
    sc.k_star = 550;
    sc.n = 500;
    sc.horizon = 500;
    Series path = simulate(ms, sc, 31);
    const double c = quantile(QuantileTable::builtin(), Functional::SupWeighted, 1, 0.05);
    MonitorOutcome mo = monitor_cusum(path.slice(1, 500), path.slice(501, 1000), 0.0, c,
                                      VarianceMethod::Empirical, 550);
    REQUIRE(mo.stopped);
    CHECK(*mo.tau > 550);
}

TEST_CASE("monitor guards: horizon exhaustion and construction errors") {
    ModelSpec ar1 = ModelSpec::ar(1, false);
    Series hist = sim_h0(ar1, vec({0.2}), 500, 11);
    ScanConfig cfg;
    cfg.horizon = 5;
    Series stream = sim_h0(ar1, vec({0.2}), 5, 12);
    MonitorOutcome mo = monitor(ar1, hist, stream, cfg);
    CHECK_FALSE(mo.stopped);
    CHECK_FALSE(mo.tau.has_value());
    CHECK(mo.trajectory.size() == 5);

    // Degenerate history must be rejected at construction.
    Series zeros(std::vector<double>(500, 0.0));
    CHECK_THROWS(Monitor(ar1, zeros, ScanConfig{}));
}
