#include "credo/verify.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <thread>

#include "credo/error.hpp"
#include "credo/rng.hpp"

namespace credo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lattice x° + j·step restricted to a box, in up to two dimensions. Points
// are visited in lexicographic order of (j0, j1).
struct Lattice {
  VectorXd origin;
  double step = 0.0;
  std::array<long, 2> lo{0, 0};
  std::array<long, 2> hi{0, 0};

  VectorXd point(long j0, long j1) const {
    VectorXd x = origin;
    x[0] += static_cast<double>(j0) * step;
    if (x.size() > 1) x[1] += static_cast<double>(j1) * step;
    return x;
  }
};

struct Incumbent {
  bool found = false;
  double r = kInf;
  std::array<long, 2> index{0, 0};
};

bool feasible_at(const PiInstance& inst, const VectorXd& x) {
  const VectorXd losses = inst.bundle().values(inst.model().forward(x));
  return ((losses + inst.credences()).array() <= 0.0).all();
}

Incumbent scan_rows(const PiInstance& inst, const Lattice& lat, long row_lo, long row_hi) {
  Incumbent best;
  for (long j0 = row_lo; j0 <= row_hi; ++j0) {
    for (long j1 = lat.lo[1]; j1 <= lat.hi[1]; ++j1) {
      const VectorXd x = lat.point(j0, j1);
      const double r = (x - inst.x0()).squaredNorm();
      // Equal r loses to the earlier (lexicographically smaller) index.
      if (r >= best.r) continue;
      if (feasible_at(inst, x)) best = {true, r, {j0, j1}};
    }
  }
  return best;
}

Incumbent scan(const PiInstance& inst, const Lattice& lat, int threads) {
  const long rows = lat.hi[0] - lat.lo[0] + 1;
  if (rows <= 0) return {};
  const long workers = std::max(1L, std::min<long>(threads, rows));
  if (workers == 1) return scan_rows(inst, lat, lat.lo[0], lat.hi[0]);

  std::vector<Incumbent> parts(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  const long chunk = (rows + workers - 1) / workers;
  for (long w = 0; w < workers; ++w) {
    const long a = lat.lo[0] + w * chunk;
    const long b = std::min(lat.hi[0], a + chunk - 1);
    if (a > b) continue;
    pool.emplace_back([&, w, a, b] { parts[static_cast<std::size_t>(w)] = scan_rows(inst, lat, a, b); });
  }
  for (std::thread& t : pool) t.join();
  // Chunks are in increasing row order, so strict < keeps the smallest index.
  Incumbent best;
  for (const Incumbent& p : parts) {
    if (p.found && p.r < best.r) best = p;
  }
  return best;
}

long lattice_floor(double v) { return static_cast<long>(std::floor(v + 1e-9)); }
long lattice_ceil(double v) { return static_cast<long>(std::ceil(v - 1e-9)); }

}  // namespace

PiInstance::PiInstance(Model model, LossBundle bundle, VectorXd x0, VectorXd credences)
    : model_(std::move(model)),
      bundle_(std::move(bundle)),
      x0_(std::move(x0)),
      credences_(std::move(credences)),
      convex_(is_convex_pair(model_, bundle_)) {
  bundle_.check_output_dim(model_.output_dim());
  if (x0_.size() != model_.input_dim()) throw DimensionError("x0", model_.input_dim(), x0_.size());
  if (credences_.size() != bundle_.num_classes()) {
    throw DimensionError("credences", bundle_.num_classes(), credences_.size());
  }
  if (!x0_.allFinite() || !credences_.allFinite()) {
    throw DomainError("instance has non-finite x0 or credences");
  }
}

PiInstance PiInstance::with_credences(VectorXd credences) const {
  return PiInstance(model_, bundle_, x0_, std::move(credences));
}

GridSolution grid_solve_pi(const PiInstance& inst, const GridOptions& opts) {
  const long p = inst.x0().size();
  if (p > 2) {
    throw DomainError("grid oracle supports p <= 2, got p = " + std::to_string(p));
  }
  if (!(opts.step > 0.0)) throw DomainError("grid step must be positive");
  if (opts.refinements < 0 || opts.refine_window < 1) throw DomainError("invalid refinement options");

  GridSolution out;
  out.r_star = kInf;
  if (inst.trivially_infeasible()) return out;

  const Box box = opts.box.value_or(Box{inst.x0().array() - 5.0, inst.x0().array() + 5.0});
  if (box.lower.size() != p || box.upper.size() != p) throw DimensionError("grid box", p, box.lower.size());
  if (!box.contains(inst.x0())) throw DomainError("grid box must contain x0");

  auto bounded = [&](const VectorXd& origin, double step) {
    Lattice lat;
    lat.origin = origin;
    lat.step = step;
    for (long d = 0; d < p; ++d) {
      lat.lo[static_cast<std::size_t>(d)] = lattice_ceil((box.lower[d] - origin[d]) / step);
      lat.hi[static_cast<std::size_t>(d)] = lattice_floor((box.upper[d] - origin[d]) / step);
    }
    return lat;
  };

  Lattice lat = bounded(inst.x0(), opts.step);
  Incumbent best = scan(inst, lat, opts.threads);
  if (!best.found) return out;
  VectorXd x_best = lat.point(best.index[0], best.index[1]);
  double r_best = best.r;

  double step = opts.step;
  for (int level = 0; level < opts.refinements; ++level) {
    const double fine = step / 10.0;
    const long half = 10L * opts.refine_window;
    for (int recenter = 0; recenter < 1000; ++recenter) {
      Lattice win = bounded(x_best, fine);
      for (std::size_t d = 0; d < static_cast<std::size_t>(p); ++d) {
        win.lo[d] = std::max(win.lo[d], -half);
        win.hi[d] = std::min(win.hi[d], half);
      }
      const Incumbent local = scan(inst, win, opts.threads);
      if (!local.found || !(local.r < r_best)) break;
      x_best = win.point(local.index[0], local.index[1]);
      r_best = local.r;
      bool on_edge = false;
      for (std::size_t d = 0; d < static_cast<std::size_t>(p); ++d) {
        const long j = local.index[d];
        on_edge = on_edge || (j == -half && win.lo[d] == -half) || (j == half && win.hi[d] == half);
      }
      if (!on_edge) break;
    }
    step = fine;
  }

  out.feasible = true;
  out.r_star = r_best;
  out.x_star = x_best;
  return out;
}

KktReport kkt_residuals(const PiInstance& inst, const VectorXd& x, const VectorXd& lambda) {
  if (lambda.size() != inst.bundle().num_classes()) {
    throw DimensionError("lambda", inst.bundle().num_classes(), lambda.size());
  }
  const LossEvaluation ev = evaluate_losses(inst.model(), inst.bundle(), x, lambda);
  const VectorXd slack = ev.losses + inst.credences();
  KktReport rep;
  rep.stationarity = (2.0 * (x - inst.x0()) + ev.weighted_grad).cwiseAbs().maxCoeff();
  rep.comp_slack = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
  rep.dual_feas = (lambda.array() >= 0.0).all();
  rep.primal_feas = std::max(0.0, slack.maxCoeff());
  return rep;
}

double fixed_point_residual(const VectorXd& credences, const VectorXd& lambda, const VectorXd& w) {
  if (lambda.size() != credences.size()) throw DimensionError("lambda", credences.size(), lambda.size());
  if (w.size() != credences.size()) throw DimensionError("weights", credences.size(), w.size());
  if (credences.size() == 0) return 0.0;
  return (credences + 0.5 * w.cwiseProduct(lambda)).cwiseAbs().maxCoeff();
}

SensitivityResult sensitivity_check(const PiInstance& inst, double h, const SolverConfig& cfg,
                                    const GridOptions& grid) {
  if (!inst.convex()) throw DomainError("sensitivity check requires a convex instance");
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  const int num_classes = inst.bundle().num_classes();

  SensitivityResult out;
  out.grad_fd.resize(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    double r[2];
    for (int s = 0; s < 2; ++s) {
      VectorXd c = inst.credences();
      c[k] += s == 0 ? h : -h;
      const GridSolution sol = grid_solve_pi(inst.with_credences(c), grid);
      if (!sol.feasible) {
        throw DomainError("credence coordinate " + std::to_string(k) + " perturbed by " +
                          (s == 0 ? "+h" : "-h") + " is infeasible");
      }
      r[s] = sol.r_star;
    }
    out.grad_fd[k] = (r[0] - r[1]) / (2.0 * h);
  }

  out.solve = solve_fixed_credence(inst.model(), inst.bundle(), inst.x0(), inst.credences(), cfg);
  out.lambda_solver = out.solve.lambda;
  out.abs_diff = (out.lambda_solver - out.grad_fd).cwiseAbs();
  out.max_abs_diff = out.abs_diff.maxCoeff();
  return out;
}

CompromiseReport compromise_check(const ProblemBase& base, const CounterfactualResult& result,
                                  int trials, double radius, std::uint64_t seed) {
  if (result.status != SolveStatus::kConverged) {
    throw DomainError("compromise check requires a converged result");
  }
  if (trials < 0 || !(radius > 0.0)) throw DomainError("invalid sampling parameters");
  const VectorXd w = base.weights.diagonal(base.bundle.num_classes());
  const double c_dagger_norm = result.c_dagger.cwiseAbs2().cwiseQuotient(w).sum();

  CompromiseReport rep;
  rep.worst_slack = kInf;
  auto compare = [&](const VectorXd& xp) {
    const VectorXd cp = credence_at_origin(base.model, base.bundle, xp);
    const double lhs = result.r_dagger - (xp - base.x0).squaredNorm();
    const double rhs = cp.cwiseAbs2().cwiseQuotient(w).sum() - c_dagger_norm;
    const double slack = rhs - lhs;
    ++rep.comparisons;
    rep.worst_slack = std::min(rep.worst_slack, slack);
    if (slack < -kCompromiseTolerance) ++rep.violations;
  };

  compare(base.x0);
  CounterRng rng(seed, 0, "compromise");
  for (int i = 0; i < trials; ++i) compare(rng.in_ball(result.x_dagger, radius));
  return rep;
}

double pa_objective(const VectorXd& x, const VectorXd& credences, const VectorXd& x0,
                    const VectorXd& w) {
  if (x.size() != x0.size()) throw DimensionError("x", x0.size(), x.size());
  if (w.size() != credences.size()) throw DimensionError("weights", credences.size(), w.size());
  return (x - x0).squaredNorm() + credences.cwiseAbs2().cwiseQuotient(w).sum();
}

double log_joint(const ProblemBase& base, const VectorXd& x, const VectorXd& credences,
                 const BayesParams& params) {
  if (!(params.t > 0.0) || !std::isfinite(params.t)) throw DomainError("t must be positive");
  const int num_classes = base.bundle.num_classes();
  if (credences.size() != num_classes) throw DimensionError("credences", num_classes, credences.size());
  const VectorXd w = params.weights.diagonal(num_classes);
  const double t = params.t;

  double value = -t * (x - base.x0).squaredNorm() - t * credences.cwiseAbs2().cwiseQuotient(w).sum();
  if ((credences.array() != 0.0).any()) {
    const VectorXd losses = base.bundle.values(base.model.forward(x));
    for (int k = 0; k < num_classes; ++k) {
      if (credences[k] == 0.0) continue;
      const double rate = 2.0 * std::abs(credences[k]) * t / w[k];
      value += -rate * (losses[k] + credences[k]) + std::log(rate);
    }
  }
  return value;
}

std::vector<MapVerdict> map_check(const ProblemBase& base, const CounterfactualResult& result,
                                  const std::vector<double>& t_schedule, int trials, double radius,
                                  std::uint64_t seed) {
  if (result.status != SolveStatus::kConverged) {
    throw DomainError("MAP check requires a converged result");
  }
  if (trials < 1 || !(radius > 0.0)) throw DomainError("invalid sampling parameters");

  std::vector<VectorXd> xs;
  std::vector<VectorXd> cs;
  CounterRng rng(seed, 0, "map");
  for (int i = 0; i < trials; ++i) {
    xs.push_back(rng.on_sphere(result.x_dagger, radius));
    cs.push_back(credence_at_origin(base.model, base.bundle, xs.back()));
  }

  std::vector<MapVerdict> out;
  for (double t : t_schedule) {
    const BayesParams params{t, base.weights};
    const double center = log_joint(base, result.x_dagger, result.c_dagger, params);
    double best = -kInf;
    for (std::size_t i = 0; i < xs.size(); ++i) best = std::max(best, log_joint(base, xs[i], cs[i], params));
    MapVerdict v;
    v.t = t;
    v.margin = center - best;
    v.is_local_max = v.margin >= -kMapTolerance;
    out.push_back(v);
  }
  return out;
}

}  // namespace credo
