#include "bench.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "seqcpd/parallel.hpp"

namespace seqcpd::bench {

std::string to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::Scan: return "C";
        case DetectorKind::HistoryAnchored: return "D";
        case DetectorKind::Cusum: return "Q";
    }
    return "?";
}

double sample_quantile_type7(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("sample_quantile_type7: empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DelayStats summarize_delays(std::vector<double> delays) {
    DelayStats s;
    s.count = static_cast<long>(delays.size());
    if (delays.empty()) return s;
    std::sort(delays.begin(), delays.end());
    double mean = 0.0;
    for (double d : delays) mean += d;
    mean /= static_cast<double>(delays.size());
    double var = 0.0;
    for (double d : delays) var += (d - mean) * (d - mean);
    var = delays.size() > 1 ? var / static_cast<double>(delays.size() - 1) : 0.0;
    s.mean = mean;
    s.sd = std::sqrt(var);
    s.min = delays.front();
    s.max = delays.back();
    s.q1 = sample_quantile_type7(delays, 0.25);
    s.median = sample_quantile_type7(delays, 0.5);
    s.q3 = sample_quantile_type7(delays, 0.75);
    return s;
}

BenchResult run_bench(const Scenario& sc, const std::vector<DetectorKind>& kinds,
                      const DetectorSettings& settings, long replications, std::uint64_t seed) {
    if (replications < 1) throw std::invalid_argument("run_bench: replications must be >= 1");
    if (kinds.empty()) throw std::invalid_argument("run_bench: no detectors requested");
    const int d = sc.model.dim();
    const bool h1 = sc.theta1.has_value();
    if (h1 && sc.k_star_offset < 1)
        throw std::invalid_argument("run_bench: change requires k_star_offset >= 1");

    BenchResult out;
    out.n = sc.n;
    out.horizon = sc.horizon;
    out.k_star = h1 ? sc.n + sc.k_star_offset : 0;
    out.replications = replications;
    out.seed = seed;

    // Resolve critical values once.
    std::vector<double> cvs;
    for (DetectorKind k : kinds) {
        switch (k) {
            case DetectorKind::Scan:
                cvs.push_back(settings.c_scan ? *settings.c_scan
                                              : quantile(QuantileTable::builtin(),
                                                         Functional::UdWeighted, d, settings.alpha));
                break;
            case DetectorKind::HistoryAnchored:
                cvs.push_back(settings.c_na ? *settings.c_na
                                            : quantile(QuantileTable::builtin(), Functional::SupNorm,
                                                       d, settings.alpha));
                break;
            case DetectorKind::Cusum:
                cvs.push_back(settings.c_cusum
                                  ? *settings.c_cusum
                                  : quantile(QuantileTable::builtin(), Functional::SupWeighted, 1,
                                             settings.alpha, settings.cusum_gamma));
                break;
        }
    }

    // Per replication, per detector: stopping index (0 = none) or -1 = failure.
    std::vector<std::vector<long>> taus(kinds.size(),
                                        std::vector<long>(static_cast<std::size_t>(replications), 0));
    parallel_for_index(replications, [&](long rep) {
        ChangeScenario cs;
        cs.theta0 = sc.theta0;
        if (h1) {
            cs.theta1 = sc.theta1;
            cs.k_star = sc.n + sc.k_star_offset;
        }
        cs.n = sc.n;
        cs.horizon = sc.horizon;
        Series path;
        try {
            path = simulate(sc.model, cs, derive_seed(seed, static_cast<std::uint64_t>(rep)),
                            sc.burn_in);
        } catch (const std::exception&) {
            for (std::size_t j = 0; j < kinds.size(); ++j)
                taus[j][static_cast<std::size_t>(rep)] = -1;
            return;
        }
        const Series hist = path.slice(1, sc.n);
        const Series stream = path.slice(sc.n + 1, path.size());
        for (std::size_t j = 0; j < kinds.size(); ++j) {
            long tau = 0;
            try {
                MonitorOutcome mo;
                switch (kinds[j]) {
                    case DetectorKind::Scan: {
                        ScanConfig cfg;
                        cfg.v_exponent = settings.v_exponent;
                        cfg.alpha = settings.alpha;
                        cfg.boundary = Boundary::constant(cvs[j]);
                        cfg.horizon = sc.horizon;
                        cfg.fit_options = settings.fit_options;
                        mo = monitor(sc.model, hist, stream, cfg);
                        break;
                    }
                    case DetectorKind::HistoryAnchored:
                        mo = monitor_na(sc.model, hist, stream, cvs[j], settings.fit_options,
                                        std::nullopt, sc.horizon);
                        break;
                    case DetectorKind::Cusum:
                        mo = monitor_cusum(hist, stream, settings.cusum_gamma, cvs[j],
                                           settings.cusum_variance, std::nullopt, sc.horizon);
                        break;
                }
                tau = (mo.stopped && mo.tau) ? *mo.tau : 0;
            } catch (const std::exception&) {
                tau = -1;
            }
            taus[j][static_cast<std::size_t>(rep)] = tau;
        }
    });

    for (std::size_t j = 0; j < kinds.size(); ++j) {
        DetectorBench db;
        db.kind = kinds[j];
        db.critical_value = cvs[j];
        for (long c = 100; c <= sc.horizon; c += 100) db.checkpoints.push_back(sc.n + c);
        db.detect_rate.assign(db.checkpoints.size(), 0.0);
        std::vector<double> delays;
        long usable = 0;
        for (long tau : taus[j]) {
            if (tau < 0) {
                ++db.failures;
                continue;
            }
            ++usable;
            if (tau > 0) {
                ++db.alarms;
                for (std::size_t c = 0; c < db.checkpoints.size(); ++c)
                    if (tau <= db.checkpoints[c]) db.detect_rate[c] += 1.0;
                if (h1) {
                    if (tau > out.k_star)
                        delays.push_back(static_cast<double>(tau - out.k_star));
                    else
                        ++db.premature_alarms;
                }
            }
        }
        if (usable > 0)
            for (double& r : db.detect_rate) r /= static_cast<double>(usable);
        db.delays = summarize_delays(std::move(delays));
        out.detectors.push_back(std::move(db));
    }
    return out;
}

std::string format_rate_table(const BenchResult& r) {
    std::ostringstream out;
    out << "detector";
    if (!r.detectors.empty())
        for (long c : r.detectors.front().checkpoints) out << "\tn+" << (c - r.n);
    out << "\n";
    for (const DetectorBench& db : r.detectors) {
        out << to_string(db.kind);
        char buf[32];
        for (double v : db.detect_rate) {
            std::snprintf(buf, sizeof(buf), "\t%.3f", v);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::string format_delay_table(const BenchResult& r) {
    std::ostringstream out;
    out << "detector\tmean\tsd\tmin\tq1\tmed\tq3\tmax\tcount\n";
    for (const DetectorBench& db : r.detectors) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s\t%.2f\t%.2f\t%.0f\t%.2f\t%.2f\t%.2f\t%.0f\t%ld\n",
                      to_string(db.kind).c_str(), db.delays.mean, db.delays.sd, db.delays.min,
                      db.delays.q1, db.delays.median, db.delays.q3, db.delays.max, db.delays.count);
        out << buf;
    }
    return out.str();
}

}  // namespace seqcpd::bench
