#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "seqcpd/model.hpp"
#include "seqcpd/series.hpp"

namespace seqcpd {

/// Inclusive 1-based observation window {lo, lo+1, ..., hi}.
struct Window {
    long lo = 1;
    long hi = 1;
    long card() const { return hi - lo + 1; }
};

/// One quasi-likelihood term with requested derivative levels filled.
struct QTerm {
    double value = 0.0;
    Eigen::VectorXd gradient;  // level >= 1
    Eigen::MatrixXd hessian;   // level == 2 (symmetric)
};

struct FitOptions {
    double grad_tol = 1e-6;   // projected-gradient sup-norm, scaled by 1 + |loglik|
    double step_tol = 1e-8;   // parameter step sup-norm
    int max_iterations = 500;
    int restarts = 3;              // jittered restarts before the simplex fallback
    bool simplex_fallback = true;  // derivative-free fallback after restarts
    std::uint64_t jitter_seed = 0x9e3779b97f4a7c15ULL;
};

/// Estimate over a window: the maximizer of the quasi-likelihood together
/// with the sandwich matrices and the standardizer used by the detectors.
struct FitResult {
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd G_hat;       // score outer-product average (symmetric PSD)
    Eigen::MatrixXd F_hat;       // averaged quasi-likelihood Hessian (symmetric)
    Eigen::MatrixXd normalizer;  // inv_sqrt(G_hat) * F_hat
    Window window;
    double loglik = 0.0;
    bool converged = false;
    bool conditioning_ok = true;  // false when G_hat tripped the eigenvalue floor
    int iterations = 0;
};

/// Single quasi-likelihood term q_t(theta) = (X_t - f_t)^2 / h_t + log h_t
/// with the past truncated at index 1, plus analytic derivatives up to the
/// requested level (0, 1 or 2).
QTerm q_term(const ModelSpec& model, const Eigen::VectorXd& theta, const Series& series, long t,
             int derivatives = 0);

/// -1/2 sum_{t in window} q_t(theta).
double loglik(const ModelSpec& model, const Eigen::VectorXd& theta, const Series& series,
              Window window);

/// Quasi-likelihood maximizer over the model's parameter box: projected
/// Newton ascent with analytic derivatives, jittered restarts and a
/// Nelder-Mead fallback. Never throws on optimizer failure; inspect
/// `converged`.
FitResult fit(const ModelSpec& model, const Series& series, Window window,
              const std::optional<Eigen::VectorXd>& init = std::nullopt,
              const FitOptions& options = {});

/// (1/card) sum of gradient outer products at theta.
Eigen::MatrixXd estimate_G(const ModelSpec& model, const Eigen::VectorXd& theta,
                           const Series& series, Window window);

/// (1/card) sum of per-term Hessians at theta (symmetrized).
Eigen::MatrixXd estimate_F(const ModelSpec& model, const Eigen::VectorXd& theta,
                           const Series& series, Window window);

/// Symmetric inverse square root via eigendecomposition. Eigenvalues are
/// clamped below at 1e-8 * trace/d; `floored`, when given, reports whether
/// the clamp was hit.
Eigen::MatrixXd inv_sqrt(const Eigen::MatrixXd& m, bool* floored = nullptr);

/// Objective value/derivatives of sum_{t in window} q_t at theta
/// (the quantity minimized by fit). Exposed for tests.
struct ObjectiveEval {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};
ObjectiveEval eval_objective(const ModelSpec& model, const Eigen::VectorXd& theta,
                             const Series& series, Window window, int derivatives);

}  // namespace seqcpd
