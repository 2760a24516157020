#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>

#include "seqcpd/series.hpp"

namespace seqcpd {

enum class ModelFamily { Ar, Garch11, MeanShift };

/// Coordinate bounds of the compact parameter space, plus the family's
/// stationarity margin (sum constraint) where one applies.
struct ParamBox {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    /// AR: max of sum_j |phi_j|; GARCH: max of alpha1 + beta1; <= 0 means none.
    double sum_limit = -1.0;
};

/// Which model family is monitored, its dimension and admissible parameter set.
///
/// Ar(p) with intercept has theta = (phi_0, phi_1, ..., phi_p); without an
/// intercept theta = (phi_1, ..., phi_p). Garch11 has theta =
/// (alpha_0, alpha_1, beta_1). MeanShift has theta = (mu) on top of a fixed
/// zero-mean noise model (any stationary Ar or Garch11 spec with frozen
/// parameters).
class ModelSpec {
public:
    static ModelSpec ar(int p, bool intercept = true);
    static ModelSpec garch11();
    static ModelSpec mean_shift(ModelSpec noise, Eigen::VectorXd noise_params);

    ModelFamily family() const { return family_; }
    int order() const { return order_; }
    bool has_intercept() const { return intercept_; }
    int dim() const { return dim_; }
    const ParamBox& param_box() const { return box_; }
    ParamBox& param_box() { return box_; }

    const ModelSpec& noise_model() const;
    const Eigen::VectorXd& noise_params() const;

private:
    ModelSpec() = default;
    ModelFamily family_ = ModelFamily::Ar;
    int order_ = 0;      // AR lag order p
    bool intercept_ = true;
    int dim_ = 0;
    ParamBox box_;
    std::shared_ptr<const ModelSpec> noise_;
    Eigen::VectorXd noise_params_;
};

/// H0/H1 description used by simulate: theta0 drives t <= k_star, theta1
/// afterwards (both absent means a pure H0 path of length n + horizon).
struct ChangeScenario {
    Eigen::VectorXd theta0;
    std::optional<Eigen::VectorXd> theta1;
    std::optional<long> k_star;  // 1-based; required iff theta1 present, > n
    long n = 0;                  // historical length
    long horizon = 0;            // monitoring length
};

/// Throws std::invalid_argument unless theta has the right length and
/// satisfies the family's sign constraints (GARCH: alpha_0 > 0, alpha_1 >= 0,
/// beta_1 >= 0).
void validate_theta(const ModelSpec& model, const Eigen::VectorXd& theta);

/// Clamp theta into the model's box and sum constraint.
Eigen::VectorXd project_into_box(const ModelSpec& model, Eigen::VectorXd theta);

bool in_box(const ModelSpec& model, const Eigen::VectorXd& theta);

/// True when any coordinate sits on a box bound (relative tolerance), the
/// signature of a window too uninformative to estimate.
bool at_box_bound(const ModelSpec& model, const Eigen::VectorXd& theta, double tol = 1e-7);

/// AR: sum_j |phi_j| < 1. GARCH: alpha_0 > 0 and alpha_1 + beta_1 < 1.
/// MeanShift: delegates to the noise model's frozen parameters.
bool check_stationarity(const ModelSpec& model, const Eigen::VectorXd& theta);

struct ConditionalMoments {
    double mean;      // conditional mean of X_t given the truncated past
    double variance;  // conditional variance (truncated recursion)
};

/// One-step conditional mean/variance at time t with the past truncated at
/// index 1 (observations before the sample start are treated as 0).
/// Valid for 1 <= t <= past.size() + 1.
ConditionalMoments conditional_moments(const ModelSpec& model, const Eigen::VectorXd& theta,
                                       const Series& past, long t);

/// Exact simulation of n + horizon observations with iid N(0,1) innovations.
/// The recursion runs under theta0 up to k_star and under theta1 afterwards,
/// carrying the trailing state (lagged values, conditional variance) across
/// the change point. Deterministic given (seed, scenario, burn_in).
Series simulate(const ModelSpec& model, const ChangeScenario& scenario, std::uint64_t seed,
                long burn_in = 500);

}  // namespace seqcpd
