#include "seqcpd/detector.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace seqcpd {

Boundary Boundary::constant(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("Boundary::constant: c must be positive");
    return Boundary(c);
}

double Boundary::operator()(double) const { return value_; }

long v_length(long n, double delta) {
    if (n < 2) throw std::invalid_argument("v_length: n must be >= 2");
    if (delta < 1.0 || delta > 3.0) throw std::invalid_argument("v_length: delta must lie in [1,3]");
    return static_cast<long>(std::floor(std::pow(std::log(static_cast<double>(n)), delta)));
}

long u_length(long n) {
    if (n < 2) throw std::invalid_argument("u_length: n must be >= 2");
    return std::max<long>(1, static_cast<long>(std::floor(std::log(static_cast<double>(n)))));
}

std::vector<long> scan_points(long n, long k, long v_n, long u_n) {
    if (k <= n) throw std::invalid_argument("scan_points: need k > n");
    if (v_n < 1 || v_n >= n) throw std::invalid_argument("scan_points: need 1 <= v_n < n");
    if (u_n < 1) throw std::invalid_argument("scan_points: need u_n >= 1");
    std::vector<long> pts;
    for (long l = n - v_n; l <= k - v_n; l += u_n) pts.push_back(l);
    return pts;
}

double detector_stat_at(const FitResult& hist, const Eigen::VectorXd& theta_win,
                        const Eigen::VectorXd& center, long n, long k, long l) {
    if (l >= k) throw std::invalid_argument("detector_stat: need l < k");
    const double weight = static_cast<double>(k - l) / static_cast<double>(k);
    return std::sqrt(static_cast<double>(n)) * weight * (hist.normalizer * (theta_win - center)).norm();
}

double detector_stat(const FitResult& hist, const Eigen::VectorXd& theta_win, long n, long k,
                     long l) {
    return detector_stat_at(hist, theta_win, hist.theta_hat, n, k, l);
}

double na_detector(const FitResult& hist, const Eigen::VectorXd& theta_1k, long n) {
    return std::sqrt(static_cast<double>(n)) * (hist.normalizer * (theta_1k - hist.theta_hat)).norm();
}

Monitor::Monitor(const ModelSpec& model, Series historical, ScanConfig cfg)
    : model_(model), buffer_(std::move(historical)), cfg_(std::move(cfg)),
      boundary_(Boundary::constant(1.0)) {
    n_ = buffer_.size();
    if (n_ < 2) throw std::invalid_argument("Monitor: historical sample too short");
    vn_ = v_length(n_, cfg_.v_exponent);
    un_ = u_length(n_);
    if (vn_ < 1 || vn_ >= n_) throw std::invalid_argument("Monitor: v_n outside (0, n)");
    if (cfg_.boundary) {
        boundary_ = *cfg_.boundary;
    } else {
        boundary_ = Boundary::constant(
            quantile(QuantileTable::builtin(), Functional::UdWeighted, model_.dim(), cfg_.alpha));
    }
    hist_ = fit(model_, buffer_, Window{1, n_}, std::nullopt, cfg_.fit_options);
    if (!hist_.converged)
        throw std::runtime_error("Monitor: historical fit did not converge");
    if (!hist_.conditioning_ok)
        throw std::runtime_error("Monitor: historical score matrix is ill-conditioned");
}

bool Monitor::terminal() const {
    if (crossed_) return true;
    if (cfg_.horizon && static_cast<long>(trajectory_.size()) >= *cfg_.horizon) return true;
    return false;
}

const StepRecord& Monitor::step(double x_k) {
    if (terminal()) throw std::logic_error("Monitor::step: monitor is terminal");
    buffer_.append(x_k);
    const long k = buffer_.size();

    StepRecord rec;
    rec.k = k;
    const std::vector<long> pts = scan_points(n_, k, vn_, un_);
    double best_ratio = -1.0;
    bool any = false;
    for (long l : pts) {
        std::optional<Eigen::VectorXd> init;
        auto it = warm_.find(l);
        init = (it != warm_.end()) ? it->second : hist_.theta_hat;
        FitResult fr = cfg_.window_local_likelihood
                           ? fit(model_, buffer_.slice(l, k), Window{1, k - l + 1}, init,
                                 cfg_.fit_options)
                           : fit(model_, buffer_, Window{l, k}, init, cfg_.fit_options);
        // A window whose estimate did not converge — or converged onto the
        // parameter-box boundary — carries no usable information; skip it.
        if (!fr.converged || at_box_bound(model_, fr.theta_hat)) {
            ++rec.skipped_points;
            continue;
        }
        warm_[l] = fr.theta_hat;
        const double stat = detector_stat(hist_, fr.theta_hat, n_, k, l);
        const double b = boundary_(static_cast<double>(k - l) / static_cast<double>(n_));
        const double ratio = stat / b;
        if (ratio > best_ratio) {
            best_ratio = ratio;
            rec.stat = stat;
            rec.threshold = b;
        }
        any = true;
    }
    if (!any) {
        // Every scan fit failed: carry the previous statistic forward.
        if (!trajectory_.empty()) {
            rec.stat = trajectory_.back().stat;
            rec.threshold = trajectory_.back().threshold;
        } else {
            rec.threshold = boundary_(static_cast<double>(k - n_) / static_cast<double>(n_));
        }
        rec.crossed = false;
    } else {
        rec.crossed = best_ratio > 1.0;
    }
    crossed_ = crossed_ || rec.crossed;
    trajectory_.push_back(rec);
    return trajectory_.back();
}

MonitorOutcome Monitor::outcome(std::optional<long> k_star) const {
    MonitorOutcome out;
    out.trajectory = trajectory_;
    out.stopped = crossed_;
    if (crossed_) {
        for (const StepRecord& r : trajectory_)
            if (r.crossed) {
                out.tau = r.k;
                break;
            }
        if (k_star && out.tau && *out.tau > *k_star) out.delay = *out.tau - *k_star;
    }
    return out;
}

MonitorOutcome monitor(const ModelSpec& model, const Series& historical, const Series& stream,
                       const ScanConfig& cfg, std::optional<long> k_star) {
    Monitor m(model, historical, cfg);
    for (long i = 1; i <= stream.size() && !m.terminal(); ++i) m.step(stream(i));
    return m.outcome(k_star);
}

MonitorOutcome monitor_na(const ModelSpec& model, const Series& historical, const Series& stream,
                          double c, const FitOptions& fit_options, std::optional<long> k_star,
                          std::optional<long> horizon) {
    const long n = historical.size();
    FitResult hist = fit(model, historical, Window{1, n}, std::nullopt, fit_options);
    if (!hist.converged) throw std::runtime_error("monitor_na: historical fit did not converge");
    Series buffer = historical;
    MonitorOutcome out;
    Eigen::VectorXd warm = hist.theta_hat;
    const long steps = horizon ? std::min<long>(*horizon, stream.size()) : stream.size();
    for (long i = 1; i <= steps; ++i) {
        buffer.append(stream(i));
        const long k = buffer.size();
        StepRecord rec;
        rec.k = k;
        rec.threshold = c;
        FitResult fr = fit(model, buffer, Window{1, k}, warm, fit_options);
        if (fr.converged && !at_box_bound(model, fr.theta_hat)) {
            warm = fr.theta_hat;
            rec.stat = na_detector(hist, fr.theta_hat, n);
            rec.crossed = rec.stat > c;
        } else {
            rec.skipped_points = 1;
            rec.stat = out.trajectory.empty() ? 0.0 : out.trajectory.back().stat;
        }
        out.trajectory.push_back(rec);
        if (rec.crossed) {
            out.stopped = true;
            out.tau = k;
            break;
        }
    }
    if (out.stopped && k_star && *out.tau > *k_star) out.delay = *out.tau - *k_star;
    return out;
}

double long_run_variance(const std::vector<double>& residuals, VarianceMethod method,
                         long bandwidth) {
    const long m = static_cast<long>(residuals.size());
    if (m < 2) throw std::invalid_argument("long_run_variance: need at least 2 residuals");
    const double mean = std::accumulate(residuals.begin(), residuals.end(), 0.0) / m;
    if (method == VarianceMethod::Empirical) {
        double acc = 0.0;
        for (double r : residuals) acc += (r - mean) * (r - mean);
        return acc / static_cast<double>(m - 1);
    }
    long q = bandwidth >= 0 ? bandwidth
                            : static_cast<long>(std::floor(std::pow(static_cast<double>(m), 1.0 / 3.0)));
    q = std::min(q, m - 1);
    auto gamma = [&](long h) {
        double acc = 0.0;
        for (long i = 0; i < m - h; ++i)
            acc += (residuals[static_cast<std::size_t>(i)] - mean) *
                   (residuals[static_cast<std::size_t>(i + h)] - mean);
        return acc / static_cast<double>(m);
    };
    double s = gamma(0);
    for (long h = 1; h <= q; ++h) s += 2.0 * (1.0 - static_cast<double>(h) / (q + 1)) * gamma(h);
    return s;
}

double cusum_detector(const Series& historical, const std::vector<double>& stream_prefix,
                      double gamma, double sigma_hat) {
    if (gamma < 0.0 || gamma >= 0.5) throw std::invalid_argument("cusum_detector: need 0 <= gamma < 1/2");
    if (!(sigma_hat > 0.0)) throw std::invalid_argument("cusum_detector: sigma_hat must be positive");
    if (stream_prefix.empty()) throw std::invalid_argument("cusum_detector: need k > n");
    const long n = historical.size();
    double mean = 0.0;
    for (long t = 1; t <= n; ++t) mean += historical(t);
    mean /= static_cast<double>(n);
    double s = 0.0;
    for (double x : stream_prefix) s += x - mean;
    const double k = static_cast<double>(n) + static_cast<double>(stream_prefix.size());
    const double norm = sigma_hat * std::sqrt(static_cast<double>(n)) * (k / n) *
                        std::pow(1.0 - n / k, gamma);
    return std::abs(s) / norm;
}

MonitorOutcome monitor_cusum(const Series& historical, const Series& stream, double gamma, double c,
                             VarianceMethod method, std::optional<long> k_star,
                             std::optional<long> horizon, long bandwidth) {
    if (gamma < 0.0 || gamma >= 0.5) throw std::invalid_argument("monitor_cusum: need 0 <= gamma < 1/2");
    const long n = historical.size();
    if (n < 2) throw std::invalid_argument("monitor_cusum: historical sample too short");
    const double sigma2 = long_run_variance(historical.values(), method, bandwidth);
    if (!(sigma2 > 0.0)) throw std::invalid_argument("monitor_cusum: nonpositive variance estimate");
    const double sigma = std::sqrt(sigma2);
    double mean = 0.0;
    for (long t = 1; t <= n; ++t) mean += historical(t);
    mean /= static_cast<double>(n);

    MonitorOutcome out;
    double s = 0.0;
    const long steps = horizon ? std::min<long>(*horizon, stream.size()) : stream.size();
    for (long i = 1; i <= steps; ++i) {
        s += stream(i) - mean;
        const double k = static_cast<double>(n + i);
        const double norm =
            sigma * std::sqrt(static_cast<double>(n)) * (k / n) * std::pow(1.0 - n / k, gamma);
        StepRecord rec;
        rec.k = n + i;
        rec.stat = std::abs(s) / norm;
        rec.threshold = c;
        rec.crossed = rec.stat > c;
        out.trajectory.push_back(rec);
        if (rec.crossed) {
            out.stopped = true;
            out.tau = n + i;
            break;
        }
    }
    if (out.stopped && k_star && *out.tau > *k_star) out.delay = *out.tau - *k_star;
    return out;
}

}  // namespace seqcpd
