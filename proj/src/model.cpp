#include "seqcpd/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace seqcpd {

namespace {
constexpr double kArSumMargin = 1.0 - 1e-6;
constexpr double kGarchSumMargin = 0.9999;
}  // namespace

ModelSpec ModelSpec::ar(int p, bool intercept) {
    if (p < 0) throw std::invalid_argument("ModelSpec::ar: order must be >= 0");
    if (p == 0 && !intercept) throw std::invalid_argument("ModelSpec::ar: empty parameter vector");
    ModelSpec m;
    m.family_ = ModelFamily::Ar;
    m.order_ = p;
    m.intercept_ = intercept;
    m.dim_ = p + (intercept ? 1 : 0);
    m.box_.lo = Eigen::VectorXd::Constant(m.dim_, -kArSumMargin);
    m.box_.hi = Eigen::VectorXd::Constant(m.dim_, kArSumMargin);
    if (intercept) {
        m.box_.lo(0) = -100.0;
        m.box_.hi(0) = 100.0;
    }
    m.box_.sum_limit = kArSumMargin;
    return m;
}

ModelSpec ModelSpec::garch11() {
    ModelSpec m;
    m.family_ = ModelFamily::Garch11;
    m.order_ = 0;
    m.intercept_ = false;
    m.dim_ = 3;
    m.box_.lo = Eigen::Vector3d(1e-6, 0.0, 0.0);
    m.box_.hi = Eigen::Vector3d(10.0, 0.999, 0.999);
    m.box_.sum_limit = kGarchSumMargin;
    return m;
}

ModelSpec ModelSpec::mean_shift(ModelSpec noise, Eigen::VectorXd noise_params) {
    if (noise.family() == ModelFamily::MeanShift)
        throw std::invalid_argument("ModelSpec::mean_shift: noise model cannot be MeanShift");
    validate_theta(noise, noise_params);
    if (!check_stationarity(noise, noise_params))
        throw std::invalid_argument("ModelSpec::mean_shift: noise parameters not stationary");
    ModelSpec m;
    m.family_ = ModelFamily::MeanShift;
    m.dim_ = 1;
    m.box_.lo = Eigen::VectorXd::Constant(1, -1e3);
    m.box_.hi = Eigen::VectorXd::Constant(1, 1e3);
    m.box_.sum_limit = -1.0;
    m.noise_ = std::make_shared<const ModelSpec>(std::move(noise));
    m.noise_params_ = std::move(noise_params);
    return m;
}

const ModelSpec& ModelSpec::noise_model() const {
    if (!noise_) throw std::logic_error("ModelSpec: no noise model (not a MeanShift spec)");
    return *noise_;
}

const Eigen::VectorXd& ModelSpec::noise_params() const {
    if (!noise_) throw std::logic_error("ModelSpec: no noise model (not a MeanShift spec)");
    return noise_params_;
}

void validate_theta(const ModelSpec& model, const Eigen::VectorXd& theta) {
    if (theta.size() != model.dim())
        throw std::invalid_argument("theta has length " + std::to_string(theta.size()) +
                                    ", model dimension is " + std::to_string(model.dim()));
    if (model.family() == ModelFamily::Garch11) {
        if (!(theta(0) > 0.0) || theta(1) < 0.0 || theta(2) < 0.0)
            throw std::invalid_argument("GARCH theta requires alpha_0 > 0, alpha_1 >= 0, beta_1 >= 0");
    }
    for (int i = 0; i < theta.size(); ++i)
        if (!std::isfinite(theta(i))) throw std::invalid_argument("theta must be finite");
}

Eigen::VectorXd project_into_box(const ModelSpec& model, Eigen::VectorXd theta) {
    const ParamBox& b = model.param_box();
    if (theta.size() != model.dim()) throw std::invalid_argument("project_into_box: bad theta length");
    for (int i = 0; i < theta.size(); ++i)
        theta(i) = std::min(b.hi(i), std::max(b.lo(i), theta(i)));
    if (b.sum_limit > 0.0) {
        if (model.family() == ModelFamily::Ar) {
            const int first = model.has_intercept() ? 1 : 0;
            double s = 0.0;
            for (int i = first; i < theta.size(); ++i) s += std::abs(theta(i));
            if (s > b.sum_limit)
                for (int i = first; i < theta.size(); ++i) theta(i) *= b.sum_limit / s;
        } else if (model.family() == ModelFamily::Garch11) {
            const double s = theta(1) + theta(2);
            if (s > b.sum_limit) {
                theta(1) *= b.sum_limit / s;
                theta(2) *= b.sum_limit / s;
            }
        }
    }
    return theta;
}

bool in_box(const ModelSpec& model, const Eigen::VectorXd& theta) {
    const ParamBox& b = model.param_box();
    if (theta.size() != model.dim()) return false;
    for (int i = 0; i < theta.size(); ++i)
        if (theta(i) < b.lo(i) - 1e-12 || theta(i) > b.hi(i) + 1e-12) return false;
    if (b.sum_limit > 0.0) {
        if (model.family() == ModelFamily::Ar) {
            const int first = model.has_intercept() ? 1 : 0;
            double s = 0.0;
            for (int i = first; i < theta.size(); ++i) s += std::abs(theta(i));
            if (s > b.sum_limit + 1e-12) return false;
        } else if (model.family() == ModelFamily::Garch11) {
            if (theta(1) + theta(2) > b.sum_limit + 1e-12) return false;
        }
    }
    return true;
}

bool at_box_bound(const ModelSpec& model, const Eigen::VectorXd& theta, double tol) {
    const ParamBox& b = model.param_box();
    if (theta.size() != model.dim()) throw std::invalid_argument("at_box_bound: bad theta length");
    for (int i = 0; i < theta.size(); ++i) {
        const double eps = tol * std::max(1.0, b.hi(i) - b.lo(i));
        if (theta(i) <= b.lo(i) + eps || theta(i) >= b.hi(i) - eps) return true;
    }
    return false;
}

bool check_stationarity(const ModelSpec& model, const Eigen::VectorXd& theta) {
    validate_theta(model, theta);
    switch (model.family()) {
        case ModelFamily::Ar: {
            const int first = model.has_intercept() ? 1 : 0;
            double s = 0.0;
            for (int i = first; i < theta.size(); ++i) s += std::abs(theta(i));
            return s < 1.0;
        }
        case ModelFamily::Garch11:
            return theta(0) > 0.0 && theta(1) + theta(2) < 1.0;
        case ModelFamily::MeanShift:
            return check_stationarity(model.noise_model(), model.noise_params());
    }
    return false;
}

namespace {

// Truncated GARCH variance recursion: h_t = a0/(1-b1) + a1 * s_t with
// s_t = sum_{j=1}^{t-1} b1^{j-1} y_{t-j} over the squared inputs y.
double garch_trunc_variance(const Eigen::VectorXd& g, const Series& x, long t, double center) {
    const double a0 = g(0), a1 = g(1), b1 = g(2);
    double s = 0.0;
    for (long u = 1; u < t; ++u) {  // s advances: s_{u+1} = y_u + b1 * s_u
        const double e = x(u) - center;
        s = e * e + b1 * s;
    }
    return a0 / (1.0 - b1) + a1 * s;
}

}  // namespace

ConditionalMoments conditional_moments(const ModelSpec& model, const Eigen::VectorXd& theta,
                                       const Series& past, long t) {
    validate_theta(model, theta);
    if (t < 1 || t > past.size() + 1)
        throw std::invalid_argument("conditional_moments: t outside [1, len+1]");
    ConditionalMoments out{0.0, 1.0};
    switch (model.family()) {
        case ModelFamily::Ar: {
            const int first = model.has_intercept() ? 1 : 0;
            double f = model.has_intercept() ? theta(0) : 0.0;
            for (int j = 1; j <= model.order() && t - j >= 1; ++j) f += theta(first + j - 1) * past(t - j);
            out.mean = f;
            out.variance = 1.0;
            break;
        }
        case ModelFamily::Garch11: {
            out.mean = 0.0;
            out.variance = garch_trunc_variance(theta, past, t, 0.0);
            break;
        }
        case ModelFamily::MeanShift: {
            const ModelSpec& nm = model.noise_model();
            const Eigen::VectorXd& g = model.noise_params();
            const double mu = theta(0);
            if (nm.family() == ModelFamily::Ar) {
                const int first = nm.has_intercept() ? 1 : 0;
                double f = mu + (nm.has_intercept() ? g(0) : 0.0);
                for (int j = 1; j <= nm.order() && t - j >= 1; ++j)
                    f += g(first + j - 1) * (past(t - j) - mu);
                out.mean = f;
                out.variance = 1.0;
            } else {
                out.mean = mu;
                out.variance = garch_trunc_variance(g, past, t, mu);
            }
            break;
        }
    }
    if (!(out.variance > 0.0))
        throw std::domain_error("conditional_moments: nonpositive conditional variance");
    return out;
}

namespace {

// One recursion step of the simulated process; `values` holds the path so far
// (0-based vector over absolute time including burn-in).
struct SimState {
    double sigma2 = 1.0;  // GARCH conditional variance carried across steps
};

double sim_step_ar(const ModelSpec& m, const Eigen::VectorXd& th, const std::vector<double>& v,
                   std::size_t t, double xi) {
    const int first = m.has_intercept() ? 1 : 0;
    double f = m.has_intercept() ? th(0) : 0.0;
    for (int j = 1; j <= m.order(); ++j) {
        if (t >= static_cast<std::size_t>(j)) f += th(first + j - 1) * v[t - j];
    }
    return f + xi;
}

double sim_step_garch(const Eigen::VectorXd& th, const std::vector<double>& v, std::size_t t,
                      double xi, SimState& st) {
    const double a0 = th(0), a1 = th(1), b1 = th(2);
    const double x1 = (t >= 1) ? v[t - 1] : 0.0;
    st.sigma2 = a0 + a1 * x1 * x1 + b1 * st.sigma2;
    return std::sqrt(st.sigma2) * xi;
}

}  // namespace

Series simulate(const ModelSpec& model, const ChangeScenario& sc, std::uint64_t seed, long burn_in) {
    if (burn_in < 0) throw std::invalid_argument("simulate: burn_in must be >= 0");
    if (sc.n < 0 || sc.horizon < 0 || sc.n + sc.horizon < 1)
        throw std::invalid_argument("simulate: need n + horizon >= 1");
    if (sc.theta1.has_value() != sc.k_star.has_value())
        throw std::invalid_argument("simulate: theta1 and k_star must be supplied together");
    if (sc.k_star && *sc.k_star <= sc.n)
        throw std::invalid_argument("simulate: change time k_star must exceed n");
    validate_theta(model, sc.theta0);
    if (!check_stationarity(model, sc.theta0))
        throw std::invalid_argument("simulate: theta0 not stationary");
    if (sc.theta1) {
        validate_theta(model, *sc.theta1);
        if (!check_stationarity(model, *sc.theta1))
            throw std::invalid_argument("simulate: theta1 not stationary");
    }

    const long total = burn_in + sc.n + sc.horizon;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Absolute change position in the burn-in-extended path; change never
    // falls inside the burn-in since k_star > n >= 0.
    const long change_at = sc.k_star ? burn_in + *sc.k_star : total + 1;

    std::vector<double> path(static_cast<std::size_t>(total));

    if (model.family() == ModelFamily::MeanShift) {
        // Simulate the fixed zero-mean noise process, then add the mean.
        const ModelSpec& nm = model.noise_model();
        ChangeScenario noise_sc;
        noise_sc.theta0 = model.noise_params();
        noise_sc.n = sc.n;
        noise_sc.horizon = sc.horizon;
        Series eps = simulate(nm, noise_sc, seed, burn_in);
        std::vector<double> out(eps.values());
        const double mu0 = sc.theta0(0);
        const double mu1 = sc.theta1 ? (*sc.theta1)(0) : mu0;
        for (long t = 1; t <= static_cast<long>(out.size()); ++t)
            out[static_cast<std::size_t>(t - 1)] += (t <= (sc.k_star ? *sc.k_star : total)) ? mu0 : mu1;
        return Series(std::move(out));
    }

    SimState st;
    if (model.family() == ModelFamily::Garch11) {
        const double a0 = sc.theta0(0), a1 = sc.theta0(1), b1 = sc.theta0(2);
        st.sigma2 = a0 / (1.0 - a1 - b1);  // start at the stationary level
    }
    for (long t = 0; t < total; ++t) {
        const Eigen::VectorXd& th = (t + 1 <= change_at) ? sc.theta0 : *sc.theta1;
        const double xi = normal(gen);
        double x = 0.0;
        if (model.family() == ModelFamily::Ar)
            x = sim_step_ar(model, th, path, static_cast<std::size_t>(t), xi);
        else
            x = sim_step_garch(th, path, static_cast<std::size_t>(t), xi, st);
        path[static_cast<std::size_t>(t)] = x;
    }
    return Series(std::vector<double>(path.begin() + burn_in, path.end()));
}

}  // namespace seqcpd
