#pragma once

#include <map>
#include <optional>
#include <vector>

#include "seqcpd/limits.hpp"
#include "seqcpd/qmle.hpp"

namespace seqcpd {

/// Threshold curve b(.) compared against the detector; non-increasing,
/// continuous, with positive infimum. Only the constant kind is shipped.
class Boundary {
public:
    static Boundary constant(double c);
    double operator()(double t) const;
    double inf_value() const { return value_; }
    bool is_constant() const { return true; }
    double constant_value() const { return value_; }

private:
    explicit Boundary(double c) : value_(c) {}
    double value_ = 1.0;
};

/// v_n = floor((log n)^delta); the scan always starts v_n before the end of
/// the history.
long v_length(long n, double delta);
/// u_n = floor(log n), the arithmetic step thinning the scan set.
long u_length(long n);

/// Scan set: {n - v_n, n - v_n + u_n, n - v_n + 2 u_n, ...} truncated at
/// k - v_n. With u_n = 1 this is the full window-start range.
std::vector<long> scan_points(long n, long k, long v_n, long u_n);

struct ScanConfig {
    double v_exponent = 1.5;  // 3/2 for AR / mean shift, 2 for ARCH-type
    double alpha = 0.05;
    std::optional<Boundary> boundary;  // default: constant at the U_d quantile
    std::optional<long> horizon = 500;
    // Condition each window's likelihood only on the window's own
    // observations instead of the whole buffer back to index 1. Off by
    // default: the truncated past of every term runs to the buffer start.
    bool window_local_likelihood = false;
    FitOptions fit_options;
};

/// Scan detector at monitoring instant k for window start l:
/// sqrt(n) * (k-l)/k * || normalizer * (theta_win - hist.theta_hat) ||.
double detector_stat(const FitResult& hist, const Eigen::VectorXd& theta_win, long n, long k,
                     long l);

/// Same statistic centered at an explicit reference point (known-parameter
/// variant; test hook).
double detector_stat_at(const FitResult& hist, const Eigen::VectorXd& theta_win,
                        const Eigen::VectorXd& center, long n, long k, long l);

/// History-anchored detector sqrt(n) * || normalizer * (theta_1k - theta_hat) ||
/// where theta_1k is fit over the full growing window {1..k}.
double na_detector(const FitResult& hist, const Eigen::VectorXd& theta_1k, long n);

struct StepRecord {
    long k = 0;
    double stat = 0.0;       // max over the scan set of the detector
    double threshold = 0.0;  // boundary value at the maximizing scan point
    bool crossed = false;
    int skipped_points = 0;  // scan fits that failed to converge at this k
};

struct MonitorOutcome {
    bool stopped = false;
    std::optional<long> tau;    // stopping index (absolute, > n)
    std::optional<long> delay;  // tau - k_star when k_star known and tau > k_star
    std::vector<StepRecord> trajectory;
};

/// Sequential state: fed one observation at a time, terminal once the
/// boundary is crossed or the horizon is exhausted.
class Monitor {
public:
    Monitor(const ModelSpec& model, Series historical, ScanConfig cfg);

    const FitResult& historical_fit() const { return hist_; }
    long n() const { return n_; }
    long v_n() const { return vn_; }
    long u_n() const { return un_; }
    bool terminal() const;

    /// Process X_k for k = n + (steps so far) + 1. Throws if terminal.
    const StepRecord& step(double x_k);

    const std::vector<StepRecord>& trajectory() const { return trajectory_; }
    MonitorOutcome outcome(std::optional<long> k_star = std::nullopt) const;

private:
    ModelSpec model_;
    Series buffer_;
    ScanConfig cfg_;
    Boundary boundary_;
    FitResult hist_;
    long n_ = 0;
    long vn_ = 0;
    long un_ = 0;
    bool crossed_ = false;
    std::vector<StepRecord> trajectory_;
    std::map<long, Eigen::VectorXd> warm_;  // per scan-point warm starts
};

/// Run the scan detector over a prerecorded stream; stops at the first alarm
/// or when the stream/horizon is exhausted.
MonitorOutcome monitor(const ModelSpec& model, const Series& historical, const Series& stream,
                       const ScanConfig& cfg, std::optional<long> k_star = std::nullopt);

/// History-anchored competitor run over a stream with constant threshold c
/// (the SupNorm quantile).
MonitorOutcome monitor_na(const ModelSpec& model, const Series& historical, const Series& stream,
                          double c, const FitOptions& fit_options = {},
                          std::optional<long> k_star = std::nullopt,
                          std::optional<long> horizon = 500);

enum class VarianceMethod { Empirical, Bartlett };

/// Long-run variance of residuals: sample variance, or the Bartlett kernel
/// estimator gamma_0 + 2 sum_{h<=q} (1 - h/(q+1)) gamma_h. A negative
/// bandwidth selects q = floor(m^{1/3}).
double long_run_variance(const std::vector<double>& residuals, VarianceMethod method,
                         long bandwidth = -1);

/// Mean-shift CUSUM statistic at k = n + prefix.size():
/// |sum_{i>n} (X_i - mean_n)| / (sigma_n sqrt(n) (k/n) (1 - n/k)^gamma).
/// Compared externally against the SupWeighted quantile.
double cusum_detector(const Series& historical, const std::vector<double>& stream_prefix,
                      double gamma, double sigma_hat);

/// Sequential CUSUM mean-shift monitor with constant threshold c.
MonitorOutcome monitor_cusum(const Series& historical, const Series& stream, double gamma, double c,
                             VarianceMethod method, std::optional<long> k_star = std::nullopt,
                             std::optional<long> horizon = 500, long bandwidth = -1);

}  // namespace seqcpd
