#pragma once

// Counterfactual primal-dual iteration for local credibility profiles.
//
// For a sample x°, the fit-risk problem
//
//   r(c) = min_x |x - x°|²   s.t.  ℓ_k(φ(x)) <= -c_k,  k = 1..K
//
// is attacked with Arrow-Hurwicz steps on its Lagrangian, except that the dual
// update uses the counterfactual credence c = -½ W λ instead of a fixed c:
//
//   x⁺   = x - η_x [2 (x - x°) + Σ_k λ_k ∇_x ℓ_k(φ(x))]
//   λ_k⁺ = [λ_k + η_λ (ℓ_k(φ(x)) - ½ w_k λ_k)]₊
//
// A fixed point (x†, λ) is a KKT pair of the problem with credences
// c† = -½ W λ, and c† is then a local credibility profile.

#include <optional>
#include <string_view>
#include <vector>

#include "credo/diffmodel.hpp"

namespace credo {

// Diagonal, positive definite weight matrix W. Either W = γI or an explicit
// diagonal.
struct WeightSpec {
  std::optional<double> gamma;
  VectorXd diag;

  static WeightSpec Gamma(double gamma);
  static WeightSpec Diagonal(VectorXd diag);

  // The diagonal for K classes. Throws DomainError on non-positive entries and
  // DimensionError when an explicit diagonal has the wrong length.
  VectorXd diagonal(int num_classes) const;
  void validate() const;
};

struct Box {
  VectorXd lower;
  VectorXd upper;

  bool contains(const VectorXd& x) const;
  VectorXd clamp(const VectorXd& x) const;
};

struct SolverConfig {
  double eta_x = 1e-3;
  double eta_lambda = 1e-2;
  int max_iters = 50'000;
  double fixed_point_tol = 1e-6;
  double stationarity_tol = 1e-6;
  // Diverged once |x - x°|₂ exceeds this; default 1e3 (1 + |x°|₂).
  std::optional<double> divergence_norm_cap;
  // Initial dual variable, one entry per class or a single broadcast value.
  VectorXd lambda_init = VectorXd::Ones(1);
  // Multiply both steps by 0.999 every 100 iterations.
  bool step_decay = false;
  // Optional clamp of the primal iterate to a declared input range.
  std::optional<Box> input_box;

  void validate() const;
};

enum class SolveStatus { kConverged, kMaxIters, kDiverged };
std::string_view to_string(SolveStatus status);

struct Residuals {
  double fixed_point = 0.0;   // |ℓ(φ(x)) - ½ W λ|_∞
  double stationarity = 0.0;  // |2(x - x°) + Σ λ_k ∇ℓ_k|_∞
  double comp_slack = 0.0;    // max_k |λ_k (ℓ_k - ½ w_k λ_k)|
};

struct CounterfactualResult {
  VectorXd x_dagger;
  VectorXd lambda;
  VectorXd c_dagger;  // exactly -½ W λ
  double r_dagger = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kMaxIters;
  Residuals residuals;
};

// ∇_x of the Lagrangian: 2(x - x°) + Σ_k λ_k ∇_x ℓ_k(φ(x)).
VectorXd lagrangian_gradient(const Model& model, const LossBundle& bundle, const VectorXd& x,
                             const VectorXd& lambda, const VectorXd& x0);

// One primal step. Returns nullopt when the gradient is not finite.
std::optional<VectorXd> primal_step(const Model& model, const LossBundle& bundle,
                                    const VectorXd& x, const VectorXd& lambda,
                                    const VectorXd& x0, double eta_x);

// One projected counterfactual dual step; `losses` are ℓ_k(φ(x)) at the
// current primal iterate and `w` the diagonal of W.
VectorXd dual_step(const VectorXd& losses, const VectorXd& lambda, const VectorXd& w,
                   double eta_lambda);

// Runs the counterfactual iteration from x = x°, λ = lambda_init until both the
// fixed-point and stationarity residuals (and complementary slackness, at the
// fixed-point tolerance) are within tolerance, or a limit is hit. Diverged and
// MaxIters results still carry the last iterate and its residuals.
CounterfactualResult solve_counterfactual(const Model& model, const LossBundle& bundle,
                                          const VectorXd& x0, const WeightSpec& weights,
                                          const SolverConfig& cfg);

// Plain Arrow-Hurwicz for fixed credences c:
//   λ_k⁺ = [λ_k + η_λ (ℓ_k(φ(x)) + c_k)]₊.
// Stops when stationarity, complementary slackness and primal feasibility
// residuals are within tolerance (fixed_point_tol is used for the last two).
struct FixedCredenceResult {
  VectorXd x;
  VectorXd lambda;
  double risk = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::kMaxIters;
  double stationarity = 0.0;
  double comp_slack = 0.0;
  double primal_violation = 0.0;
};

FixedCredenceResult solve_fixed_credence(const Model& model, const LossBundle& bundle,
                                         const VectorXd& x0, const VectorXd& credences,
                                         const SolverConfig& cfg);

}  // namespace credo
