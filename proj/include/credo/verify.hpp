#pragma once

// Independent checks of solver output against the theory of the fit-risk
// problem: a brute-force grid oracle for r(c), KKT residuals, the
// counterfactual fixed point, dual sensitivity, the compromise inequality,
// the joint (x, c) objective, and the Bayesian log-joint.
//
// Nothing here calls solve_counterfactual except sensitivity_check, which needs
// duals at fixed credences and uses solve_fixed_credence for them.

#include <cstdint>
#include <optional>
#include <vector>

#include "credo/diffmodel.hpp"
#include "credo/solver.hpp"

namespace credo {

// Problem data shared by the checks: model, losses, sample and weights.
struct ProblemBase {
  Model model;
  LossBundle bundle;
  VectorXd x0;
  WeightSpec weights;
};

// The fit-risk problem at fixed credences c. convex is computed at
// construction from the model/loss pair.
class PiInstance {
 public:
  PiInstance(Model model, LossBundle bundle, VectorXd x0, VectorXd credences);

  const Model& model() const { return model_; }
  const LossBundle& bundle() const { return bundle_; }
  const VectorXd& x0() const { return x0_; }
  const VectorXd& credences() const { return credences_; }
  bool convex() const { return convex_; }
  // Some c_k > 0: losses are non-negative, so nothing is feasible.
  bool trivially_infeasible() const { return (credences_.array() > 0.0).any(); }

  PiInstance with_credences(VectorXd credences) const;

 private:
  Model model_;
  LossBundle bundle_;
  VectorXd x0_;
  VectorXd credences_;
  bool convex_;
};

struct GridOptions {
  // Per-dimension search interval; defaults to x° ± 5.
  std::optional<Box> box;
  double step = 1e-3;
  // Each refinement divides the step by 10 and rescans a window of
  // ±refine_window coarse steps around the incumbent, re-centering until the
  // incumbent is interior.
  int refinements = 1;
  int refine_window = 2;
  int threads = 1;
};

struct GridSolution {
  bool feasible = false;
  double r_star = 0.0;  // +inf when infeasible
  VectorXd x_star;
};

// Exhaustive scan for p <= 2. Grid points are x° + j·step inside the box, so
// x° itself is always scanned. Ties go to the lexicographically smallest grid
// index. Throws DomainError for p > 2.
GridSolution grid_solve_pi(const PiInstance& inst, const GridOptions& opts = {});

struct KktReport {
  double stationarity = 0.0;  // |2(x - x°) + Σ λ_k ∇ℓ_k|_∞
  double comp_slack = 0.0;    // max_k |λ_k (ℓ_k + c_k)|
  bool dual_feas = true;      // λ >= 0
  double primal_feas = 0.0;   // max(0, max_k ℓ_k + c_k)
};

KktReport kkt_residuals(const PiInstance& inst, const VectorXd& x, const VectorXd& lambda);

// |c + ½ W λ|_∞ with w the diagonal of W.
double fixed_point_residual(const VectorXd& credences, const VectorXd& lambda, const VectorXd& w);

struct SensitivityResult {
  VectorXd lambda_solver;  // duals of the fixed-credence problem
  VectorXd grad_fd;        // central differences of the grid oracle's r*
  VectorXd abs_diff;
  double max_abs_diff = 0.0;
  FixedCredenceResult solve;
};

// Compares duals at credences c with ∂r*/∂c from central differences of the
// grid oracle with step h. Requires a convex instance; throws DomainError
// naming the coordinate when c ± h e_k is infeasible.
SensitivityResult sensitivity_check(const PiInstance& inst, double h, const SolverConfig& cfg,
                                    const GridOptions& grid = {});

struct CompromiseReport {
  int comparisons = 0;
  int violations = 0;
  double worst_slack = 0.0;  // min over comparisons of rhs - lhs
};

inline constexpr double kCompromiseTolerance = 1e-8;

// Samples `trials` points x' uniformly in the ball of `radius` around x† and
// also compares against x° itself. With c'_k = -ℓ_k(φ(x')), counts pairs where
//   r† - |x' - x°|² <= |c'|²_{W⁻¹} - |c†|²_{W⁻¹}
// fails by more than kCompromiseTolerance. Requires a converged result.
CompromiseReport compromise_check(const ProblemBase& base, const CounterfactualResult& result,
                                  int trials, double radius, std::uint64_t seed);

// |x - x°|² + |c|²_{W⁻¹}.
double pa_objective(const VectorXd& x, const VectorXd& credences, const VectorXd& x0,
                    const VectorXd& w);

struct BayesParams {
  double t = 1.0;
  WeightSpec weights;
};

// Unnormalized log density of the Gaussian × shifted-exponential credibility
// model, dropping additive terms independent of (x, c, t):
//
//   -t |x - x°|² - Σ_{c_k≠0} ρ_k (ℓ_k(φ(x)) + c_k) - t |c|²_{W⁻¹} + Σ_{c_k≠0} log ρ_k
//
// with rate ρ_k = 2 |c_k| t / w_k.
double log_joint(const ProblemBase& base, const VectorXd& x, const VectorXd& credences,
                 const BayesParams& params);

struct MapVerdict {
  double t = 0.0;
  bool is_local_max = false;
  double margin = 0.0;  // log_joint(x†, c†) - max over neighbors
};

inline constexpr double kMapTolerance = 1e-8;

// For each t, compares log_joint at (x†, c†) with `trials` neighbors
// (x', -ℓ(φ(x'))) for x' on the sphere of `radius` around x†.
std::vector<MapVerdict> map_check(const ProblemBase& base, const CounterfactualResult& result,
                                  const std::vector<double>& t_schedule, int trials, double radius,
                                  std::uint64_t seed);

}  // namespace credo
