#include "seqcpd/retro.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqcpd {

namespace {

// Numerical stand-in for the det(G) != 0 indicator: the smallest eigenvalue
// must clear the same relative floor used by inv_sqrt.
bool usable_score_matrix(const Eigen::MatrixXd& G) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double floor = 1e-8 * std::max(G.trace() / G.rows(), 0.0);
    return es.eigenvalues().minCoeff() > std::max(floor, 1e-300);
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& F, const Eigen::MatrixXd& G) {
    return F * G.ldlt().solve(F);
}

Eigen::MatrixXd sigma_from_fits(const FitResult& fwd, const FitResult& bwd, long n, long k,
                                bool* degenerate) {
    const long d = fwd.theta_hat.size();
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    bool any = false;
    if (fwd.converged && usable_score_matrix(fwd.G_hat)) {
        sigma += (static_cast<double>(k) / n) * sandwich(fwd.F_hat, fwd.G_hat);
        any = true;
    }
    if (bwd.converged && usable_score_matrix(bwd.G_hat)) {
        sigma += (static_cast<double>(n - k) / n) * sandwich(bwd.F_hat, bwd.G_hat);
        any = true;
    }
    if (degenerate) *degenerate = !any;
    return 0.5 * (sigma + sigma.transpose());
}

}  // namespace

Eigen::MatrixXd sigma_matrix(const ModelSpec& model, const Series& series, long n, long k,
                             bool* degenerate, const RetroOptions& opt) {
    if (n > series.size()) throw std::invalid_argument("sigma_matrix: n exceeds series length");
    const int d = model.dim();
    if (k < d + 2 || k > n - 1) throw std::invalid_argument("sigma_matrix: split k out of range");
    FitResult fwd = fit(model, series, Window{1, k}, std::nullopt, opt.fit_options);
    FitResult bwd = fit(model, series, Window{k, n}, std::nullopt, opt.fit_options);
    return sigma_from_fits(fwd, bwd, n, k, degenerate);
}

namespace {

RetroResult retro_impl(const ModelSpec& model, const Series& series, long v_n,
                       double critical_value, const RetroOptions& opt, bool two_sided) {
    const long n = series.size();
    const int d = model.dim();
    if (v_n < 1) throw std::invalid_argument("retro_test: v_n must be >= 1");
    if (n < 2 * v_n + d + 2)
        throw std::invalid_argument("retro_test: series too short (need n >= 2 v_n + dim + 2)");

    RetroResult out;
    out.critical_value = critical_value;

    FitResult full = fit(model, series, Window{1, n}, std::nullopt, opt.fit_options);
    if (!full.converged) return out;  // inconclusive

    const long kmin = std::max<long>(v_n, d + 2);
    const long kmax = std::min<long>(n - v_n, n - d - 1);
    if (kmin > kmax) return out;

    const long m = kmax - kmin + 1;
    std::vector<FitResult> fwd(static_cast<std::size_t>(m));
    Eigen::VectorXd warm = full.theta_hat;
    for (long k = kmin; k <= kmax; ++k) {
        fwd[static_cast<std::size_t>(k - kmin)] =
            fit(model, series, Window{1, k}, warm, opt.fit_options);
        if (fwd[static_cast<std::size_t>(k - kmin)].converged)
            warm = fwd[static_cast<std::size_t>(k - kmin)].theta_hat;
    }
    std::vector<FitResult> bwd;
    if (two_sided) {
        bwd.resize(static_cast<std::size_t>(m));
        warm = full.theta_hat;
        for (long k = kmax; k >= kmin; --k) {
            bwd[static_cast<std::size_t>(k - kmin)] =
                fit(model, series, Window{k, n}, warm, opt.fit_options);
            if (bwd[static_cast<std::size_t>(k - kmin)].converged)
                warm = bwd[static_cast<std::size_t>(k - kmin)].theta_hat;
        }
    }

    Eigen::MatrixXd sigma_full;
    if (!two_sided) {
        if (!usable_score_matrix(full.G_hat)) return out;  // inconclusive
        sigma_full = sandwich(full.F_hat, full.G_hat);
    }

    double best = -1.0;
    for (long k = kmin; k <= kmax; ++k) {
        const FitResult& f = fwd[static_cast<std::size_t>(k - kmin)];
        RetroPoint pt;
        pt.k = k;
        if (two_sided) {
            const FitResult& b = bwd[static_cast<std::size_t>(k - kmin)];
            if (f.converged && b.converged) {
                bool degenerate = false;
                Eigen::MatrixXd sigma = sigma_from_fits(f, b, n, k, &degenerate);
                if (!degenerate) {
                    const Eigen::VectorXd df = f.theta_hat - full.theta_hat;
                    const Eigen::VectorXd db = b.theta_hat - full.theta_hat;
                    pt.q1 = (static_cast<double>(k) * k / n) * df.dot(sigma * df);
                    pt.q2 = (static_cast<double>(n - k) * (n - k) / n) * db.dot(sigma * db);
                    pt.valid = true;
                }
            }
        } else if (f.converged) {
            const Eigen::VectorXd df = f.theta_hat - full.theta_hat;
            pt.q1 = (static_cast<double>(k) * k / n) * df.dot(sigma_full * df);
            pt.valid = true;
        }
        if (pt.valid) {
            const double q = std::max(pt.q1, pt.q2);
            if (q > best) {
                best = q;
                out.k_hat = k;
                out.statistic = q;
            }
            out.conclusive = true;
        }
        out.trajectory.push_back(pt);
    }
    out.rejected = out.conclusive && out.statistic > critical_value;
    return out;
}

}  // namespace

RetroResult retro_test(const ModelSpec& model, const Series& series, long v_n,
                       double critical_value, const RetroOptions& opt) {
    return retro_impl(model, series, v_n, critical_value, opt, true);
}

RetroResult retro_test_ls(const ModelSpec& model, const Series& series, long v_n,
                          double critical_value, const RetroOptions& opt) {
    return retro_impl(model, series, v_n, critical_value, opt, false);
}

long retro_default_v(long n, double delta) {
    if (n < 2) throw std::invalid_argument("retro_default_v: n must be >= 2");
    return std::max<long>(1, static_cast<long>(
                                 std::floor(std::pow(std::log(static_cast<double>(n)), delta))));
}

namespace {

// Bracketed constants shipped for the two retrospective statistics at the
// 5% level; other dimensions require user-supplied values.
bool default_retro_critical(int d, double& cv_max2, double& cv_ls) {
    if (d == 3) {
        cv_max2 = 3.47;
        cv_ls = 3.06;
        return true;
    }
    if (d == 4) {
        cv_max2 = 3.98;
        cv_ls = 3.45;
        return true;
    }
    return false;
}

}  // namespace

Segmentation segment(const ModelSpec& model, const Series& series, const SegmentConfig& cfg) {
    const long N = series.size();
    const int d = model.dim();
    if (cfg.initial_n < d + 2 || cfg.initial_n >= N)
        throw std::invalid_argument("segment: initial_n must allow both a fit and monitoring");

    double cv_max2 = cfg.critical_value_max2;
    double cv_ls = cfg.critical_value_ls;
    if (cv_max2 <= 0.0 || cv_ls <= 0.0) {
        double dm, dl;
        if (!default_retro_critical(d, dm, dl))
            throw std::invalid_argument(
                "segment: no built-in retrospective critical values for dimension " +
                std::to_string(d) + "; supply them explicitly");
        if (cv_max2 <= 0.0) cv_max2 = dm;
        if (cv_ls <= 0.0) cv_ls = dl;
    }

    Segmentation out;
    long seg_start = 1;
    long hist_n = cfg.initial_n;
    const long min_hist = std::max<long>(30, 2L * d + 4);

    while (seg_start + hist_n <= N) {
        hist_n = std::max(hist_n, min_hist);
        // Extend the history window forward until the historical fit behaves.
        Monitor* mon = nullptr;
        std::unique_ptr<Monitor> holder;
        while (true) {
            if (seg_start + hist_n - 1 > N) break;
            try {
                ScanConfig sc = cfg.scan;
                sc.horizon = std::nullopt;  // run to the end of the data
                holder = std::make_unique<Monitor>(
                    model, series.slice(seg_start, seg_start + hist_n - 1), sc);
                mon = holder.get();
                break;
            } catch (const std::exception&) {
                out.notes.push_back("history [" + std::to_string(seg_start) + "," +
                                    std::to_string(seg_start + hist_n - 1) +
                                    "] extended: fit did not converge");
                hist_n += std::max<long>(5, hist_n / 10);
            }
        }
        if (!mon || seg_start + hist_n > N) break;  // not enough data left to monitor

        long tau_abs = 0;
        for (long t = seg_start + hist_n; t <= N && !mon->terminal(); ++t) {
            const StepRecord& rec = mon->step(series(t));
            if (rec.crossed) {
                tau_abs = t;
                break;
            }
        }
        if (tau_abs == 0) break;  // no alarm: the remaining stretch is one segment

        // Locate the break inside [seg_start, tau_abs] with both tests and
        // keep the more significant one.
        const Series stage = series.slice(seg_start, tau_abs);
        const long stage_n = stage.size();
        const long v_n = retro_default_v(stage_n, cfg.retro_v_exponent);
        long khat_rel = stage_n - v_n;
        std::string used = "alarm";
        double stat = 0.0, cv = cv_max2;
        try {
            RetroResult r2 = retro_test(model, stage, v_n, cv_max2, cfg.retro);
            RetroResult r0 = retro_test_ls(model, stage, v_n, cv_ls, cfg.retro);
            const double sig2 = r2.conclusive ? r2.statistic / cv_max2 : -1.0;
            const double sig0 = r0.conclusive ? r0.statistic / cv_ls : -1.0;
            if (sig2 < 0.0 && sig0 < 0.0) {
                out.notes.push_back("stage ending " + std::to_string(tau_abs) +
                                    ": retrospective tests inconclusive; break placed at alarm");
                khat_rel = stage_n;
            } else if (sig2 >= sig0) {
                khat_rel = r2.k_hat;
                used = "split";
                stat = r2.statistic;
                cv = cv_max2;
            } else {
                khat_rel = r0.k_hat;
                used = "full";
                stat = r0.statistic;
                cv = cv_ls;
            }
        } catch (const std::exception& e) {
            out.notes.push_back("stage ending " + std::to_string(tau_abs) +
                                ": retrospective test unavailable (" + e.what() +
                                "); break placed at alarm");
            khat_rel = stage_n;
        }

        const long break_abs = seg_start - 1 + khat_rel;
        SegmentBreak sb;
        sb.break_index = break_abs;
        sb.alarm_index = tau_abs;
        sb.monitor_resume = tau_abs + 1;
        sb.test_used = used;
        sb.statistic = stat;
        sb.critical_value = cv;
        out.audit.push_back(sb);
        out.break_indices.push_back(break_abs);

        SegmentPiece piece;
        piece.start = seg_start;
        piece.end = break_abs;
        piece.fitted = fit(model, series, Window{seg_start, break_abs}, std::nullopt,
                           cfg.retro.fit_options);
        out.segments.push_back(piece);

        // New history: the stretch between the located break and the alarm.
        seg_start = break_abs + 1;
        hist_n = tau_abs - break_abs;
    }

    SegmentPiece last;
    last.start = seg_start;
    last.end = N;
    long fit_lo = seg_start;
    if (N - seg_start + 1 < d + 2) {
        fit_lo = std::max<long>(1, N - (d + 2) + 1);
        out.notes.push_back("final segment shorter than dim + 2; fitted over a trailing window");
    }
    last.fitted = fit(model, series, Window{fit_lo, N}, std::nullopt, cfg.retro.fit_options);
    out.segments.push_back(last);
    return out;
}

}  // namespace seqcpd
