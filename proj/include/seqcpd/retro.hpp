#pragma once

#include <string>
#include <vector>

#include "seqcpd/detector.hpp"
#include "seqcpd/qmle.hpp"

namespace seqcpd {

struct RetroOptions {
    FitOptions fit_options;
};

struct RetroPoint {
    long k = 0;
    double q1 = 0.0;   // forward component at k
    double q2 = 0.0;   // backward component at k (0 for the single-window test)
    bool valid = false;  // both sub-window fits converged with usable score matrices
};

/// Off-line break test result: the max statistic, the index attaining it,
/// and the per-k trajectory of both quadratic-form components.
struct RetroResult {
    double statistic = 0.0;
    long k_hat = 0;
    double critical_value = 0.0;
    bool rejected = false;
    bool conclusive = false;  // false when no k produced usable fits
    std::vector<RetroPoint> trajectory;
};

/// Covariance plug-in at split k: (k/n) F G^{-1} F over {1..k} plus
/// ((n-k)/n) F G^{-1} F over {k..n}; a side with a numerically singular G
/// contributes zero. `degenerate` reports both sides vanishing.
Eigen::MatrixXd sigma_matrix(const ModelSpec& model, const Series& series, long n, long k,
                             bool* degenerate = nullptr, const RetroOptions& opt = {});

/// Two-sided retrospective break test: maximizes over k in [v_n, n - v_n]
/// the larger of the forward and backward standardized distances
/// (k^2/n)(theta_{1,k}-theta_{1,n})' Sigma (theta_{1,k}-theta_{1,n}) and its
/// mirror on {k..n}.
RetroResult retro_test(const ModelSpec& model, const Series& series, long v_n,
                       double critical_value, const RetroOptions& opt = {});

/// Single-window variant: forward component only, with the full-sample
/// covariance plug-in; conventional v_n = (log n)^2.
RetroResult retro_test_ls(const ModelSpec& model, const Series& series, long v_n,
                          double critical_value, const RetroOptions& opt = {});

long retro_default_v(long n, double delta = 2.0);

struct SegmentBreak {
    long break_index = 0;      // located break (absolute index)
    long alarm_index = 0;      // monitoring instant that raised the alarm
    long monitor_resume = 0;   // first monitored index of the next stage
    std::string test_used;     // "max2" or "ls"
    double statistic = 0.0;
    double critical_value = 0.0;
};

struct SegmentPiece {
    long start = 0;
    long end = 0;
    FitResult fitted;
};

/// Multi-break segmentation produced by monitor -> locate -> restart.
struct Segmentation {
    std::vector<long> break_indices;
    std::vector<SegmentPiece> segments;
    std::vector<SegmentBreak> audit;
    std::vector<std::string> notes;  // e.g. history extensions after short segments
};

struct SegmentConfig {
    long initial_n = 0;          // length of the first historical window
    ScanConfig scan;             // monitoring settings
    double retro_v_exponent = 2.0;
    double critical_value_max2 = 0.0;  // 0 selects the built-in d=3/d=4 defaults
    double critical_value_ls = 0.0;
    RetroOptions retro;
};

/// Monitor the series from initial_n onwards; on each alarm run both
/// retrospective tests on the current stage, take the break located by the
/// more significant one (larger statistic / critical value), restart with
/// history equal to the post-break stretch, and continue to the end.
Segmentation segment(const ModelSpec& model, const Series& series, const SegmentConfig& cfg);

}  // namespace seqcpd
