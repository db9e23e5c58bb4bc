#include "credo/solver.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "credo/error.hpp"

namespace credo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDecayPeriod = 100;
constexpr double kDecayFactor = 0.999;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(name) + " must be positive and finite");
  }
}

VectorXd initial_lambda(const SolverConfig& cfg, int num_classes) {
  VectorXd lambda;
  if (cfg.lambda_init.size() == 1) {
    lambda = VectorXd::Constant(num_classes, cfg.lambda_init[0]);
  } else if (cfg.lambda_init.size() == num_classes) {
    lambda = cfg.lambda_init;
  } else {
    throw DimensionError("lambda_init", num_classes, cfg.lambda_init.size());
  }
  return lambda;
}

void check_problem(const Model& model, const LossBundle& bundle, const VectorXd& x0) {
  bundle.check_output_dim(model.output_dim());
  if (x0.size() != model.input_dim()) throw DimensionError("x0", model.input_dim(), x0.size());
  if (!x0.allFinite()) throw DomainError("x0 has non-finite entries");
}

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIters: return "max_iters";
    case SolveStatus::kDiverged: return "diverged";
  }
  return "unknown";
}

WeightSpec WeightSpec::Gamma(double gamma) {
  WeightSpec w;
  w.gamma = gamma;
  w.validate();
  return w;
}

WeightSpec WeightSpec::Diagonal(VectorXd diag) {
  WeightSpec w;
  w.diag = std::move(diag);
  w.validate();
  return w;
}

void WeightSpec::validate() const {
  if (gamma) {
    require_positive(*gamma, "gamma");
    return;
  }
  if (diag.size() == 0) throw DomainError("weight diagonal is empty and no gamma given");
  for (Eigen::Index k = 0; k < diag.size(); ++k) {
    if (!(diag[k] > 0.0) || !std::isfinite(diag[k])) {
      throw DomainError("weight diagonal entry " + std::to_string(k) + " must be positive");
    }
  }
}

VectorXd WeightSpec::diagonal(int num_classes) const {
  validate();
  if (gamma) return VectorXd::Constant(num_classes, *gamma);
  if (diag.size() != num_classes) throw DimensionError("weight diagonal", num_classes, diag.size());
  return diag;
}

bool Box::contains(const VectorXd& x) const {
  return x.size() == lower.size() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

VectorXd Box::clamp(const VectorXd& x) const {
  if (x.size() != lower.size()) throw DimensionError("box clamp", lower.size(), x.size());
  return x.cwiseMax(lower).cwiseMin(upper);
}

void SolverConfig::validate() const {
  require_positive(eta_x, "eta_x");
  require_positive(eta_lambda, "eta_lambda");
  if (max_iters < 1) throw DomainError("max_iters must be at least 1");
  require_positive(fixed_point_tol, "fixed_point_tol");
  require_positive(stationarity_tol, "stationarity_tol");
  if (divergence_norm_cap) require_positive(*divergence_norm_cap, "divergence_norm_cap");
  if (lambda_init.size() == 0) throw DomainError("lambda_init is empty");
  if (!lambda_init.allFinite() || (lambda_init.array() < 0.0).any()) {
    throw DomainError("lambda_init must be finite and non-negative");
  }
  if (input_box) {
    if (input_box->lower.size() != input_box->upper.size()) {
      throw DimensionError("input box upper", input_box->lower.size(), input_box->upper.size());
    }
    if ((input_box->lower.array() > input_box->upper.array()).any()) {
      throw DomainError("input box has lower > upper");
    }
  }
}

VectorXd lagrangian_gradient(const Model& model, const LossBundle& bundle, const VectorXd& x,
                             const VectorXd& lambda, const VectorXd& x0) {
  return 2.0 * (x - x0) + evaluate_losses(model, bundle, x, lambda).weighted_grad;
}

std::optional<VectorXd> primal_step(const Model& model, const LossBundle& bundle,
                                    const VectorXd& x, const VectorXd& lambda,
                                    const VectorXd& x0, double eta_x) {
  if ((lambda.array() < 0.0).any()) throw DomainError("lambda must be non-negative");
  if (x0.size() != x.size()) throw DimensionError("x0", x.size(), x0.size());
  const VectorXd g = lagrangian_gradient(model, bundle, x, lambda, x0);
  if (!g.allFinite()) return std::nullopt;
  return VectorXd(x - eta_x * g);
}

VectorXd dual_step(const VectorXd& losses, const VectorXd& lambda, const VectorXd& w,
                   double eta_lambda) {
  if (lambda.size() != losses.size()) throw DimensionError("lambda", losses.size(), lambda.size());
  if (w.size() != losses.size()) throw DimensionError("weights", losses.size(), w.size());
  if (!losses.allFinite() || !lambda.allFinite()) {
    throw DomainError("dual step received non-finite values");
  }
  return (lambda + eta_lambda * (losses - 0.5 * w.cwiseProduct(lambda))).cwiseMax(0.0);
}

CounterfactualResult solve_counterfactual(const Model& model, const LossBundle& bundle,
                                          const VectorXd& x0, const WeightSpec& weights,
                                          const SolverConfig& cfg) {
  cfg.validate();
  check_problem(model, bundle, x0);
  const int num_classes = bundle.num_classes();
  const VectorXd w = weights.diagonal(num_classes);
  const double cap = cfg.divergence_norm_cap.value_or(1e3 * (1.0 + x0.norm()));

  CounterfactualResult res;
  VectorXd x = x0;
  VectorXd lambda = initial_lambda(cfg, num_classes);
  double eta_x = cfg.eta_x;
  double eta_lambda = cfg.eta_lambda;

  for (int it = 0;; ++it) {
    res.iterations = it;
    if (!x.allFinite() || (x - x0).norm() > cap || !lambda.allFinite()) {
      res.status = SolveStatus::kDiverged;
      res.residuals = {kInf, kInf, kInf};
      break;
    }
    const LossEvaluation ev = evaluate_losses(model, bundle, x, lambda);
    const VectorXd g = 2.0 * (x - x0) + ev.weighted_grad;
    const VectorXd defect = ev.losses - 0.5 * w.cwiseProduct(lambda);
    res.residuals.fixed_point = inf_norm(defect);
    res.residuals.stationarity = inf_norm(g);
    res.residuals.comp_slack = inf_norm(lambda.cwiseProduct(defect));
    if (!g.allFinite() || !ev.losses.allFinite()) {
      res.status = SolveStatus::kDiverged;
      break;
    }
    if (res.residuals.fixed_point <= cfg.fixed_point_tol &&
        res.residuals.stationarity <= cfg.stationarity_tol &&
        res.residuals.comp_slack <= cfg.fixed_point_tol) {
      res.status = SolveStatus::kConverged;
      break;
    }
    if (it == cfg.max_iters) {
      res.status = SolveStatus::kMaxIters;
      break;
    }
    x -= eta_x * g;
    if (cfg.input_box) x = cfg.input_box->clamp(x);
    lambda = dual_step(ev.losses, lambda, w, eta_lambda);
    if (cfg.step_decay && (it + 1) % kDecayPeriod == 0) {
      eta_x *= kDecayFactor;
      eta_lambda *= kDecayFactor;
    }
  }

  res.x_dagger = x;
  res.lambda = lambda;
  res.c_dagger = -(0.5 * w.cwiseProduct(lambda));
  res.r_dagger = (x - x0).squaredNorm();
  return res;
}

FixedCredenceResult solve_fixed_credence(const Model& model, const LossBundle& bundle,
                                         const VectorXd& x0, const VectorXd& credences,
                                         const SolverConfig& cfg) {
  cfg.validate();
  check_problem(model, bundle, x0);
  const int num_classes = bundle.num_classes();
  if (credences.size() != num_classes) throw DimensionError("credences", num_classes, credences.size());
  if (!credences.allFinite()) throw DomainError("credences have non-finite entries");
  const double cap = cfg.divergence_norm_cap.value_or(1e3 * (1.0 + x0.norm()));

  FixedCredenceResult res;
  VectorXd x = x0;
  VectorXd lambda = initial_lambda(cfg, num_classes);
  double eta_x = cfg.eta_x;
  double eta_lambda = cfg.eta_lambda;

  for (int it = 0;; ++it) {
    res.iterations = it;
    if (!x.allFinite() || (x - x0).norm() > cap || !lambda.allFinite()) {
      res.status = SolveStatus::kDiverged;
      res.stationarity = res.comp_slack = res.primal_violation = kInf;
      break;
    }
    const LossEvaluation ev = evaluate_losses(model, bundle, x, lambda);
    const VectorXd g = 2.0 * (x - x0) + ev.weighted_grad;
    const VectorXd slack = ev.losses + credences;
    res.stationarity = inf_norm(g);
    res.comp_slack = inf_norm(lambda.cwiseProduct(slack));
    res.primal_violation = std::max(0.0, slack.maxCoeff());
    if (!g.allFinite()) {
      res.status = SolveStatus::kDiverged;
      break;
    }
    if (res.stationarity <= cfg.stationarity_tol && res.comp_slack <= cfg.fixed_point_tol &&
        res.primal_violation <= cfg.fixed_point_tol) {
      res.status = SolveStatus::kConverged;
      break;
    }
    if (it == cfg.max_iters) {
      res.status = SolveStatus::kMaxIters;
      break;
    }
    x -= eta_x * g;
    if (cfg.input_box) x = cfg.input_box->clamp(x);
    lambda = (lambda + eta_lambda * slack).cwiseMax(0.0);
    if (cfg.step_decay && (it + 1) % kDecayPeriod == 0) {
      eta_x *= kDecayFactor;
      eta_lambda *= kDecayFactor;
    }
  }

  res.x = x;
  res.lambda = lambda;
  res.risk = (x - x0).squaredNorm();
  return res;
}

}  // namespace credo
