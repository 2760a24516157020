#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqcpd/detector.hpp"
#include "seqcpd/model.hpp"

namespace seqcpd::bench {

enum class DetectorKind { Scan, HistoryAnchored, Cusum };

std::string to_string(DetectorKind k);

/// One simulated monitoring design: historical length n, monitoring horizon,
/// and an optional change of the monitored parameter at n + k_star_offset.
struct Scenario {
    ModelSpec model = ModelSpec::ar(1);
    Eigen::VectorXd theta0;
    std::optional<Eigen::VectorXd> theta1;
    long k_star_offset = 0;  // > 0 under the alternative
    long n = 500;
    long horizon = 500;
    long burn_in = 500;
};

struct DetectorSettings {
    double alpha = 0.05;
    double v_exponent = 1.5;
    std::optional<double> c_scan;   // default: U_d quantile at alpha
    std::optional<double> c_na;     // default: sup-norm quantile at alpha
    std::optional<double> c_cusum;  // default: weighted-sup quantile at alpha
    double cusum_gamma = 0.0;
    VarianceMethod cusum_variance = VarianceMethod::Empirical;
    FitOptions fit_options;
};

struct DelayStats {
    long count = 0;
    double mean = 0.0, sd = 0.0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct DetectorBench {
    DetectorKind kind = DetectorKind::Scan;
    double critical_value = 0.0;
    std::vector<long> checkpoints;     // n+100, ..., n+horizon
    std::vector<double> detect_rate;   // fraction of runs with tau <= checkpoint
    DelayStats delays;                 // over runs with k_star < tau < infinity
    long alarms = 0;
    long premature_alarms = 0;  // tau <= k_star (only possible under H1)
    long failures = 0;          // replications that raised an error
};

struct BenchResult {
    long n = 0;
    long horizon = 0;
    long k_star = 0;  // absolute index, 0 under H0
    long replications = 0;
    std::uint64_t seed = 0;
    std::vector<DetectorBench> detectors;
};

/// Replay the simulation protocol: simulate `replications` paths, run each
/// requested detector on every path, and tabulate detection rates at the
/// checkpoints plus delay summaries. Replications run in parallel with seeds
/// derived from `seed` by replication index.
BenchResult run_bench(const Scenario& sc, const std::vector<DetectorKind>& kinds,
                      const DetectorSettings& settings, long replications, std::uint64_t seed);

DelayStats summarize_delays(std::vector<double> delays);

/// Type-7 (linear interpolation) sample quantile on sorted data.
double sample_quantile_type7(const std::vector<double>& sorted, double p);

std::string format_rate_table(const BenchResult& r);
std::string format_delay_table(const BenchResult& r);

}  // namespace seqcpd::bench
