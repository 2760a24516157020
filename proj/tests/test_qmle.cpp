#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "seqcpd/model.hpp"
#include "seqcpd/qmle.hpp"

using namespace seqcpd;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<long>(v.size()));
    long i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Central finite differences of the q-term value; the oracle the analytic
// gradient is checked against.
Eigen::VectorXd fd_gradient(const ModelSpec& m, const Eigen::VectorXd& th, const Series& x, long t) {
    Eigen::VectorXd g(th.size());
    for (int i = 0; i < th.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(th(i)));
        Eigen::VectorXd up = th, dn = th;
        up(i) += h;
        dn(i) -= h;
        g(i) = (q_term(m, up, x, t).value - q_term(m, dn, x, t).value) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hessian(const ModelSpec& m, const Eigen::VectorXd& th, const Series& x, long t) {
    Eigen::MatrixXd H(th.size(), th.size());
    for (int j = 0; j < th.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(th(j)));
        Eigen::VectorXd up = th, dn = th;
        up(j) += h;
        dn(j) -= h;
        H.col(j) = (q_term(m, up, x, t, 1).gradient - q_term(m, dn, x, t, 1).gradient) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

Eigen::VectorXd random_interior_theta(const ModelSpec& m, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.15, 0.85);
    const ParamBox& b = m.param_box();
    Eigen::VectorXd th(m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        double lo = b.lo(i), hi = b.hi(i);
        if (hi - lo > 4.0) {  // unbounded-ish coordinate: stay near the origin
            lo = -2.0;
            hi = 2.0;
        }
        th(i) = lo + u(gen) * (hi - lo);
    }
    // Keep well inside the stationarity margin.
    if (m.family() == ModelFamily::Ar) {
        const int first = m.has_intercept() ? 1 : 0;
        double s = 0.0;
        for (int i = first; i < m.dim(); ++i) s += std::abs(th(i));
        if (s > 0.8)
            for (int i = first; i < m.dim(); ++i) th(i) *= 0.8 / s;
    } else if (m.family() == ModelFamily::Garch11) {
        th(0) = 0.02 + 0.2 * u(gen);
        const double s = th(1) + th(2);
        if (s > 0.85) {
            th(1) *= 0.85 / s;
            th(2) *= 0.85 / s;
        }
    }
    return th;
}

Series simulated_path(const ModelSpec& m, const Eigen::VectorXd& th, long n, std::uint64_t seed) {
    ChangeScenario sc;
    sc.theta0 = th;
    sc.n = n;
    sc.horizon = 0;
    return simulate(m, sc, seed);
}

// Intercept-OLS on the zero-extended AR design, the closed-form oracle for
// the AR quasi-likelihood maximizer.
Eigen::VectorXd ols_ar(const ModelSpec& m, const Series& x, Window w) {
    const int p = m.order();
    const int first = m.has_intercept() ? 1 : 0;
    const int d = m.dim();
    Eigen::MatrixXd XtX = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd Xty = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd z(d);
    for (long t = w.lo; t <= w.hi; ++t) {
        if (first) z(0) = 1.0;
        for (int j = 1; j <= p; ++j) z(first + j - 1) = (t - j >= 1) ? x(t - j) : 0.0;
        XtX += z * z.transpose();
        Xty += z * x(t);
    }
    return XtX.ldlt().solve(Xty);
}

}  // namespace

TEST_CASE("q_term hand-computed values") {
    // AR(1): X_t = 2 with X_{t-1} = 1 and theta = 0 gives q = 4, grad = (-4, -4).
    ModelSpec ar1 = ModelSpec::ar(1);
    Series x(std::vector<double>{1.0, 2.0});
    QTerm q = q_term(ar1, vec({0.0, 0.0}), x, 2, 2);
    CHECK(q.value == doctest::Approx(4.0));
    CHECK(q.gradient(0) == doctest::Approx(-4.0));
    CHECK(q.gradient(1) == doctest::Approx(-4.0));
    CHECK(q.hessian(0, 0) == doctest::Approx(2.0));
    CHECK(q.hessian(0, 1) == doctest::Approx(2.0));
    CHECK(q.hessian(1, 1) == doctest::Approx(2.0));

    // Constant-variance GARCH: q = X^2/a0 + log a0.
    ModelSpec g = ModelSpec::garch11();
    Series y(std::vector<double>{0.5, -1.5});
    QTerm qg = q_term(g, vec({0.25, 0.0, 0.0}), y, 2);
    CHECK(qg.value == doctest::Approx(2.25 / 0.25 + std::log(0.25)));
}

TEST_CASE("analytic derivatives match finite differences on every family") {
    std::mt19937_64 gen(31);
    struct Case {
        ModelSpec model;
        const char* name;
    };
    std::vector<Case> cases;
    cases.push_back({ModelSpec::ar(2), "ar2"});
    cases.push_back({ModelSpec::ar(1, false), "ar1-nointercept"});
    cases.push_back({ModelSpec::garch11(), "garch"});
    cases.push_back({ModelSpec::mean_shift(ModelSpec::ar(1, false), vec({0.3})), "ms-ar"});
    cases.push_back({ModelSpec::mean_shift(ModelSpec::garch11(), vec({0.05, 0.2, 0.5})), "ms-garch"});

    for (const Case& c : cases) {
        CAPTURE(c.name);
        Eigen::VectorXd sim_th = random_interior_theta(c.model, gen);
        Series x = simulated_path(c.model, sim_th, 60, 17);
        for (int rep = 0; rep < 20; ++rep) {
            Eigen::VectorXd th = random_interior_theta(c.model, gen);
            const long t = 1 + static_cast<long>(gen() % 60);
            QTerm q = q_term(c.model, th, x, t, 2);
            Eigen::VectorXd fg = fd_gradient(c.model, th, x, t);
            Eigen::MatrixXd fh = fd_hessian(c.model, th, x, t);
            const double gerr = (q.gradient - fg).lpNorm<Eigen::Infinity>() /
                                (1.0 + fg.lpNorm<Eigen::Infinity>());
            const double herr = (q.hessian - fh).lpNorm<Eigen::Infinity>() /
                                (1.0 + fh.lpNorm<Eigen::Infinity>());
            CHECK(gerr <= 1e-5);
            CHECK(herr <= 1e-4);
        }
    }
}

TEST_CASE("loglik: single point, additivity, OLS optimality") {
    ModelSpec ar1 = ModelSpec::ar(1);
    Eigen::VectorXd th = vec({0.1, 0.3});
    Series x = simulated_path(ar1, vec({0.0, 0.2}), 200, 5);

    CHECK(loglik(ar1, th, x, Window{7, 7}) == doctest::Approx(-0.5 * q_term(ar1, th, x, 7).value));

    const double whole = loglik(ar1, th, x, Window{3, 180});
    const double parts = loglik(ar1, th, x, Window{3, 90}) + loglik(ar1, th, x, Window{91, 180});
    CHECK(std::abs(whole - parts) <= 1e-10 * (1.0 + std::abs(whole)));

    // OLS is the exact maximizer: perturbations never improve it.
    Eigen::VectorXd ols = ols_ar(ar1, x, Window{1, 200});
    const double at_ols = loglik(ar1, ols, x, Window{1, 200});
    std::mt19937_64 gen(9);
    std::normal_distribution<double> nd(0.0, 0.05);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd pert = ols;
        pert(0) += nd(gen);
        pert(1) += nd(gen);
        pert = project_into_box(ar1, pert);
        CHECK(loglik(ar1, pert, x, Window{1, 200}) <= at_ols + 1e-12);
    }
}

TEST_CASE("fit recovers the OLS solution exactly on AR(1)") {
    ModelSpec ar1 = ModelSpec::ar(1);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Series x = simulated_path(ar1, vec({0.0, 0.2}), 500, seed);
        FitResult fr = fit(ar1, x, Window{1, 500});
        Eigen::VectorXd ols = ols_ar(ar1, x, Window{1, 500});
        CHECK(fr.converged);
        CHECK((fr.theta_hat - ols).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
}

TEST_CASE("fit is deterministic and flags degenerate inputs") {
    ModelSpec ar1 = ModelSpec::ar(1);
    Series x = simulated_path(ar1, vec({0.0, 0.2}), 300, 77);
    FitResult a = fit(ar1, x, Window{1, 300});
    FitResult b = fit(ar1, x, Window{1, 300});
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.loglik == b.loglik);

    // Constant series: the score matrix is singular and gets flagged.
    Series zeros(std::vector<double>(50, 0.0));
    FitResult z = fit(ar1, zeros, Window{1, 50});
    CHECK((!z.converged || !z.conditioning_ok));

    CHECK_THROWS_AS(fit(ar1, x, Window{1, 2}), std::invalid_argument);
}

TEST_CASE("GARCH fit is consistent at n = 5000") {
    ModelSpec g = ModelSpec::garch11();
    Eigen::VectorXd th0 = vec({0.01, 0.3, 0.2});
    int ok = 0;
    const int seeds = 30;
    for (int s = 1; s <= seeds; ++s) {
        Series x = simulated_path(g, th0, 5000, 1000 + static_cast<std::uint64_t>(s));
        FitResult fr = fit(g, x, Window{1, 5000});
        if (fr.converged && (fr.theta_hat - th0).norm() <= 0.1) ++ok;
    }
    CHECK(ok >= static_cast<int>(0.95 * seeds));
}

TEST_CASE("estimate_G / estimate_F structure") {
    ModelSpec ar1 = ModelSpec::ar(1);
    Series x = simulated_path(ar1, vec({0.0, 0.2}), 400, 13);
    Eigen::VectorXd th = vec({0.05, 0.15});

    // Single-point window: G is the outer product of that gradient.
    QTerm q = q_term(ar1, th, x, 10, 1);
    Eigen::MatrixXd G1 = estimate_G(ar1, th, x, Window{10, 10});
    CHECK((G1 - q.gradient * q.gradient.transpose()).norm() == doctest::Approx(0.0));

    // AR F-hat is the constant-regressor Hessian average.
    Eigen::MatrixXd F = estimate_F(ar1, th, x, Window{1, 400});
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(2, 2);
    for (long t = 1; t <= 400; ++t) {
        Eigen::Vector2d z(1.0, t >= 2 ? x(t - 1) : 0.0);
        expect += 2.0 * z * z.transpose();
    }
    expect /= 400.0;
    CHECK((F - expect).norm() <= 1e-10 * expect.norm());

    // PSD of G over random windows.
    Eigen::MatrixXd G = estimate_G(ar1, th, x, Window{37, 319});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);

    // Mean-shift over unit noise: F = 2 exactly.
    ModelSpec ms = ModelSpec::mean_shift(ModelSpec::ar(1, false), vec({0.0}));
    Eigen::MatrixXd Fms = estimate_F(ms, vec({0.3}), x, Window{1, 400});
    CHECK(Fms(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("estimate_G matches the sample-moment oracle on a long AR path") {
    ModelSpec ar1 = ModelSpec::ar(1);
    Series x = simulated_path(ar1, vec({0.0, 0.2}), 100000, 29);
    FitResult fr = fit(ar1, x, Window{1, x.size()});
    Eigen::MatrixXd G = fr.G_hat;

    // Under the true model the scores factor: G ~ 4 sigma^2 E[z z'].
    double rss = 0.0;
    Eigen::MatrixXd zz = Eigen::MatrixXd::Zero(2, 2);
    for (long t = 1; t <= x.size(); ++t) {
        Eigen::Vector2d z(1.0, t >= 2 ? x(t - 1) : 0.0);
        const double r = x(t) - fr.theta_hat.dot(z);
        rss += r * r;
        zz += z * z.transpose();
    }
    Eigen::MatrixXd oracle = 4.0 * (rss / x.size()) * (zz / x.size());
    CHECK((G - oracle).norm() / oracle.norm() <= 0.02);
}

TEST_CASE("inv_sqrt: identities and the defining property") {
    CHECK((inv_sqrt(Eigen::MatrixXd::Identity(3, 3)) - Eigen::MatrixXd::Identity(3, 3)).norm() <=
          1e-14);

    Eigen::MatrixXd d2 = Eigen::Vector2d(4.0, 9.0).asDiagonal();
    Eigen::MatrixXd r = inv_sqrt(d2);
    CHECK(r(0, 0) == doctest::Approx(0.5));
    CHECK(r(1, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(r(0, 1) == doctest::Approx(0.0));

    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) A(i, j) = nd(gen);
    Eigen::MatrixXd S = A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd W = inv_sqrt(S);
    CHECK((W * S * W - Eigen::MatrixXd::Identity(4, 4)).lpNorm<Eigen::Infinity>() <= 1e-10);

    bool floored = false;
    inv_sqrt(Eigen::MatrixXd::Zero(2, 2), &floored);
    CHECK(floored);
    Eigen::MatrixXd near0 = Eigen::Vector2d(1.0, 1e-12).asDiagonal();
    inv_sqrt(near0, &floored);
    CHECK(floored);
}
