#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace seqcpd {

/// Limiting Brownian functionals whose quantiles calibrate the detectors.
///  - UdWeighted:  sup_{0<u<1} f(u) ||W_d(u)||       (scan detector)
///  - SupNorm:     sup_{0<s<1} ||W_d(s)||            (history-anchored detector)
///  - SupWeighted: sup_{0<s<1} |W_1(s)| / s^gamma    (CUSUM; 0 <= gamma < 1/2)
enum class Functional { UdWeighted, SupNorm, SupWeighted };

std::string to_string(Functional f);
Functional functional_from_string(const std::string& s);

struct QuantileEntry {
    Functional functional = Functional::UdWeighted;
    int d = 1;
    double gamma = 0.0;  // SupWeighted only
    double alpha = 0.05;
    double quantile = 0.0;
    long grid_size = 0;
    long replications = 0;
    std::uint64_t seed = 0;
};

/// Monte-Carlo quantiles keyed by (functional, d, gamma, alpha), with the
/// simulation settings that produced them. Persisted as a versioned
/// plain-text table.
class QuantileTable {
public:
    void insert(const QuantileEntry& e);
    const QuantileEntry* find(Functional f, int d, double alpha, double gamma = 0.0) const;
    const std::vector<QuantileEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    void save(const std::string& path) const;
    static QuantileTable load(const std::string& path);

    /// Table shipped with the artifact (50,000 replications, 5,000-point grid).
    static const QuantileTable& builtin();

private:
    std::vector<QuantileEntry> entries_;
};

/// Weight entering the scan detector's limit law:
/// f(u) = (sqrt(9-u)+sqrt(1-u)) / (sqrt(9-u)+3 sqrt(1-u))
///        * (2 / (3-u+sqrt((9-u)(1-u))))^{1/2},  continuous on [0,1], f(1)=1.
double f_weight(double u);

struct McOptions {
    long grid_size = 5000;
    long replications = 50000;
    std::uint64_t seed = 20230815;
};

/// One sample per replication of sup over the grid of f(u)||W_d(u)||,
/// Brownian paths built from cumulative Gaussian increments on a uniform
/// grid of (0,1]. Deterministic given the seed; replications run in parallel.
std::vector<double> simulate_ud(int d, long grid_size, long replications, std::uint64_t seed);

std::vector<double> simulate_sup_norm(int d, long grid_size, long replications, std::uint64_t seed);

/// d = 1 weighted-sup functional; for gamma > 0 the grid excludes s < 1e-3.
std::vector<double> simulate_sup_weighted(double gamma, long grid_size, long replications,
                                          std::uint64_t seed);

/// Empirical (1-alpha) quantile of a sample (type-1, left-continuous).
double empirical_quantile_upper(std::vector<double> sample, double alpha);

/// (1-alpha)-quantile of the requested functional: looked up in the table
/// when present, otherwise freshly simulated with `mc`.
double quantile(const QuantileTable& table, Functional f, int d, double alpha, double gamma = 0.0,
                const McOptions& mc = {});

/// Two-sample Kolmogorov-Smirnov distance between the distribution of
/// sup_{1<t<=T} sup_{1<s<t} ||W_d(s) - s W_d(1)|| / t and the distribution of
/// sup_u f(u)||W_d(u)||, each simulated independently. Small values confirm
/// the distributional identity behind the detector's critical values.
double identity_selftest(int d, double grid_T, long grid_size, long replications,
                         std::uint64_t seed);

/// Two-sample KS distance between arbitrary samples (exposed for tests).
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace seqcpd
