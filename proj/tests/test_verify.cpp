#include <doctest.h>

#include <cmath>

#include "credo/error.hpp"
#include "credo/solver.hpp"
#include "credo/verify.hpp"
#include "support.hpp"

using namespace credo;

namespace {

Model identity(int p) { return Model::Linear(MatrixXd::Identity(p, p), VectorXd::Zero(p)); }

LossBundle anchor_at(double a) { return LossBundle::SquaredDistance(MatrixXd::Constant(1, 1, a)); }

ProblemBase quadratic_base() { return {identity(1), anchor_at(2.0), VectorXd::Zero(1), WeightSpec::Gamma(2.0)}; }

SolverConfig tight() {
  SolverConfig cfg;
  cfg.eta_x = 1e-2;
  cfg.eta_lambda = 1e-2;
  cfg.max_iters = 2'000'000;
  cfg.fixed_point_tol = 1e-11;
  cfg.stationarity_tol = 1e-11;
  return cfg;
}

CounterfactualResult solve(const ProblemBase& b) {
  const CounterfactualResult r = solve_counterfactual(b.model, b.bundle, b.x0, b.weights, tight());
  REQUIRE(r.status == SolveStatus::kConverged);
  return r;
}

}  // namespace

TEST_CASE("grid oracle reports infeasibility for positive credences") {
  const PiInstance inst(identity(1), anchor_at(2.0), VectorXd::Zero(1), VectorXd::Constant(1, 0.1));
  CHECK(inst.trivially_infeasible());
  const GridSolution g = grid_solve_pi(inst);
  CHECK_FALSE(g.feasible);
  CHECK(std::isinf(g.r_star));
}

TEST_CASE("grid oracle at the credences of x° returns x° itself") {
  CounterRng rng(1, 0, "grid-origin");
  MatrixXd wm = testing::random_matrix(rng, 3, 2);
  const Model m = Model::Linear(wm, testing::random_vector(rng, 3));
  const LossBundle b = LossBundle::CrossEntropy(3);
  const VectorXd x0 = testing::random_vector(rng, 2);
  const PiInstance inst(m, b, x0, credence_at_origin(m, b, x0));
  GridOptions opts;
  opts.box = Box{x0.array() - 0.5, x0.array() + 0.5};
  const GridSolution g = grid_solve_pi(inst, opts);
  REQUIRE(g.feasible);
  CHECK(g.r_star == 0.0);
  CHECK(g.x_star == x0);
}

TEST_CASE("grid oracle finds the quadratic risk") {
  const PiInstance inst(identity(1), anchor_at(2.0), VectorXd::Zero(1), VectorXd::Constant(1, -1.0));
  const GridSolution g = grid_solve_pi(inst);
  REQUIRE(g.feasible);
  CHECK(std::abs(g.r_star - 1.0) <= 1e-3);
  CHECK(std::abs(g.x_star[0] - 1.0) <= 1e-3);
}

TEST_CASE("grid oracle rejects more than two dimensions") {
  const PiInstance inst(identity(3), LossBundle::CrossEntropy(3), VectorXd::Zero(3), VectorXd::Constant(3, -1.0));
  CHECK_THROWS_AS(grid_solve_pi(inst), DomainError);
}

TEST_CASE("grid oracle result does not depend on the number of threads") {
  MatrixXd anchors(2, 2);
  anchors << 1.0, 1.0, 1.0, -1.0;
  const PiInstance inst(identity(2), LossBundle::SquaredDistance(anchors), VectorXd::Zero(2),
                        VectorXd::Constant(2, -1.44));
  GridOptions one;
  one.box = Box{VectorXd::Constant(2, -1.5), VectorXd::Constant(2, 1.5)};
  GridOptions four = one;
  four.threads = 4;
  const GridSolution a = grid_solve_pi(inst, one);
  const GridSolution b = grid_solve_pi(inst, four);
  CHECK(a.r_star == b.r_star);
  CHECK(a.x_star == b.x_star);
}

TEST_CASE("KKT residuals on hand-checked points") {
  const PiInstance inst(identity(1), anchor_at(2.0), VectorXd::Zero(1), VectorXd::Constant(1, -1.0));
  const KktReport at_solution = kkt_residuals(inst, VectorXd::Ones(1), VectorXd::Ones(1));
  CHECK(at_solution.stationarity == 0.0);
  CHECK(at_solution.comp_slack == 0.0);
  CHECK(at_solution.primal_feas == 0.0);
  CHECK(at_solution.dual_feas);

  const KktReport at_origin = kkt_residuals(inst, VectorXd::Zero(1), VectorXd::Zero(1));
  CHECK(at_origin.stationarity == 0.0);
  CHECK(at_origin.primal_feas == doctest::Approx(3.0));
  CHECK_FALSE(kkt_residuals(inst, VectorXd::Zero(1), -VectorXd::Ones(1)).dual_feas);
}

TEST_CASE("KKT residuals match a direct recomputation at random points") {
  CounterRng rng(2, 0, "kkt");
  for (int trial = 0; trial < 30; ++trial) {
    const Model m = Model::Linear(testing::random_matrix(rng, 3, 2), testing::random_vector(rng, 3));
    const LossBundle b = LossBundle::CrossEntropy(3);
    const VectorXd x0 = testing::random_vector(rng, 2);
    const VectorXd c = -testing::random_vector(rng, 3).cwiseAbs();
    const VectorXd x = testing::random_vector(rng, 2);
    const VectorXd lambda = testing::random_vector(rng, 3).cwiseAbs();
    const KktReport rep = kkt_residuals(PiInstance(m, b, x0, c), x, lambda);
    VectorXd g = 2.0 * (x - x0);
    double cs = 0.0, pf = 0.0;
    for (int k = 0; k < 3; ++k) {
      g += lambda[k] * testing::finite_difference_gradient(m, b, x, k);
      const double slack = b.value(m.forward(x), k) + c[k];
      cs = std::max(cs, std::abs(lambda[k] * slack));
      pf = std::max(pf, slack);
    }
    CHECK(rep.stationarity > 0.0);
    CHECK(rep.stationarity == doctest::Approx(g.cwiseAbs().maxCoeff()).epsilon(1e-7));
    CHECK(rep.comp_slack == doctest::Approx(cs).epsilon(1e-12));
    CHECK(rep.primal_feas == doctest::Approx(std::max(0.0, pf)).epsilon(1e-12));
  }
}

TEST_CASE("fixed-point residual on hand-checked inputs") {
  const auto one = [](double v) { return VectorXd::Constant(1, v); };
  CHECK(fixed_point_residual(one(-1.0), one(1.0), one(2.0)) == 0.0);
  CHECK(fixed_point_residual(one(0.0), one(1.0), one(2.0)) == 1.0);
  VectorXd lambda(3), w(3);
  lambda << 0.3, 1.7, 0.0;
  w << 2.0, 0.5, 9.0;
  CHECK(fixed_point_residual(-(0.5 * w.cwiseProduct(lambda)), lambda, w) == 0.0);
}

TEST_CASE("fixed-point residual is exactly zero for every returned profile") {
  CounterRng rng(3, 0, "fp");
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = testing::random_mlp(rng, 2, 3, Activation::kSoftplus);
    const WeightSpec ws = WeightSpec::Gamma(1.0 + rng.uniform() * 10.0);
    SolverConfig cfg;
    cfg.eta_x = 1e-2;
    const CounterfactualResult r =
        solve_counterfactual(m, LossBundle::CrossEntropy(3), testing::random_vector(rng, 2), ws, cfg);
    CHECK(fixed_point_residual(r.c_dagger, r.lambda, ws.diagonal(3)) == 0.0);
  }
}

TEST_CASE("dual sensitivity matches finite differences of the grid oracle") {
  GridOptions grid;
  grid.refinements = 2;

  SUBCASE("quadratic instance") {
    grid.box = Box{VectorXd::Constant(1, -3.0), VectorXd::Constant(1, 3.0)};
    const PiInstance inst(identity(1), anchor_at(2.0), VectorXd::Zero(1), VectorXd::Constant(1, -1.0));
    const SensitivityResult s = sensitivity_check(inst, 1e-2, tight(), grid);
    CHECK(s.lambda_solver[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.max_abs_diff <= 1e-2);
  }
  SUBCASE("slack constraint has zero dual and zero derivative") {
    grid.box = Box{VectorXd::Constant(1, -3.0), VectorXd::Constant(1, 3.0)};
    MatrixXd anchors(2, 1);
    anchors << 2.0, -2.0;
    VectorXd c(2);
    c << -1.0, -20.0;
    const PiInstance inst(identity(1), LossBundle::SquaredDistance(anchors), VectorXd::Zero(1), c);
    const SensitivityResult s = sensitivity_check(inst, 1e-2, tight(), grid);
    CHECK(s.lambda_solver[1] == doctest::Approx(0.0));
    CHECK(std::abs(s.grad_fd[1]) <= 1e-9);
    CHECK(s.max_abs_diff <= 1e-2);
  }
  SUBCASE("two-constraint logistic instance in one dimension") {
    grid.box = Box{VectorXd::Constant(1, -3.0), VectorXd::Constant(1, 3.0)};
    VectorXd c(2);
    c << -softplus(-0.8), -2.0;
    const PiInstance inst(identity(1), LossBundle::LogisticNll(2), VectorXd::Constant(1, 0.3), c);
    const SensitivityResult s = sensitivity_check(inst, 1e-2, tight(), grid);
    CHECK(s.lambda_solver[0] == doctest::Approx(1.0 / sigmoid(-0.8)).epsilon(1e-6));
    CHECK(s.max_abs_diff <= 1e-2);
  }
}

TEST_CASE("sensitivity check refuses unsupported instances") {
  CounterRng rng(4, 0, "sens-errors");
  const PiInstance nonconvex(testing::random_mlp(rng, 1, 2, Activation::kSoftplus), LossBundle::CrossEntropy(2),
                             VectorXd::Zero(1), VectorXd::Constant(2, -1.0));
  CHECK_THROWS_AS(sensitivity_check(nonconvex, 1e-2, tight()), DomainError);

  // Second constraint (x + 2)² <= 0.005 is feasible but c₁ + h > 0 is not.
  MatrixXd anchors(2, 1);
  anchors << 2.0, -2.0;
  VectorXd c(2);
  c << -20.0, -0.005;
  const PiInstance edge(identity(1), LossBundle::SquaredDistance(anchors), VectorXd::Zero(1), c);
  GridOptions grid;
  grid.box = Box{VectorXd::Constant(1, -3.0), VectorXd::Constant(1, 3.0)};
  try {
    sensitivity_check(edge, 1e-2, tight(), grid);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("coordinate 1") != std::string::npos);
  }
}

TEST_CASE("compromise inequality holds on convex instances") {
  SUBCASE("quadratic instance") {
    const ProblemBase b = quadratic_base();
    const CompromiseReport rep = compromise_check(b, solve(b), 1000, 0.5, 7);
    CHECK(rep.comparisons == 1001);
    CHECK(rep.violations == 0);
  }
  SUBCASE("logistic instance including x° itself") {
    const ProblemBase b{identity(1), LossBundle::LogisticNll(2), VectorXd::Constant(1, 0.3), WeightSpec::Gamma(2.0)};
    const CompromiseReport rep = compromise_check(b, solve(b), 1000, 0.5, 8);
    CHECK(rep.violations == 0);
  }
}

TEST_CASE("compromise slack vanishes at the solution itself") {
  const ProblemBase b = quadratic_base();
  const CounterfactualResult r = solve(b);
  const VectorXd w = b.weights.diagonal(1);
  const VectorXd c_tight = -b.bundle.values(b.model.forward(r.x_dagger));
  const double lhs = r.r_dagger - (r.x_dagger - b.x0).squaredNorm();
  const double rhs = c_tight.cwiseAbs2().cwiseQuotient(w).sum() - r.c_dagger.cwiseAbs2().cwiseQuotient(w).sum();
  CHECK(std::abs(rhs - lhs) <= 1e-9);
}

TEST_CASE("joint objective on hand-checked inputs") {
  const VectorXd w = VectorXd::Constant(1, 2.0);
  CHECK(pa_objective(VectorXd::Zero(1), VectorXd::Zero(1), VectorXd::Zero(1), w) == 0.0);
  CHECK(pa_objective(VectorXd::Ones(1), -VectorXd::Ones(1), VectorXd::Zero(1), w) == doctest::Approx(1.5));
  CounterRng rng(5, 0, "pa");
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd x = testing::random_vector(rng, 3), x0 = testing::random_vector(rng, 3);
    const VectorXd c = testing::random_vector(rng, 2), ww = testing::random_vector(rng, 2).cwiseAbs().array() + 0.1;
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) expected += (x[i] - x0[i]) * (x[i] - x0[i]);
    for (int k = 0; k < 2; ++k) expected += c[k] * c[k] / ww[k];
    CHECK(pa_objective(x, c, x0, ww) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("log-joint on hand-checked inputs") {
  const ProblemBase b = quadratic_base();
  const BayesParams p{10.0, b.weights};
  CHECK(log_joint(b, VectorXd::Zero(1), VectorXd::Zero(1), p) == 0.0);
  CHECK(log_joint(b, VectorXd::Constant(1, 0.7), VectorXd::Zero(1), p) == doctest::Approx(-10.0 * 0.49));
}

TEST_CASE("profile dominates sampled neighbours for large concentration") {
  SUBCASE("quadratic instance over a schedule") {
    const ProblemBase b = quadratic_base();
    const auto verdicts = map_check(b, solve(b), {1e2, 1e3, 1e4}, 1000, 1e-2, 11);
    REQUIRE(verdicts.size() == 3);
    CHECK(verdicts.back().is_local_max);
    CHECK(verdicts.back().margin >= -kMapTolerance);
  }
  SUBCASE("constant model") {
    VectorXd logits(3);
    logits << 0.2, -0.4, 1.0;
    const ProblemBase b{Model::Constant(2, logits), LossBundle::CrossEntropy(3), VectorXd::Ones(2),
                        WeightSpec::Gamma(2.0)};
    const auto verdicts = map_check(b, solve(b), {1e4}, 1000, 1e-2, 12);
    CHECK(verdicts.front().is_local_max);
  }
  SUBCASE("a point displaced by 0.1 with the same credences is dominated") {
    const ProblemBase b = quadratic_base();
    const CounterfactualResult r = solve(b);
    const BayesParams p{1e4, b.weights};
    const double at = log_joint(b, r.x_dagger, r.c_dagger, p);
    const double off = log_joint(b, r.x_dagger.array() + 0.1, r.c_dagger, p);
    CHECK(at > off);
  }
}

TEST_CASE("once dominance starts it persists for larger concentration") {
  CounterRng rng(6, 0, "onset");
  for (int trial = 0; trial < 8; ++trial) {
    MatrixXd anchors = testing::random_matrix(rng, 2, 2, 1.5);
    const ProblemBase b{identity(2), LossBundle::SquaredDistance(anchors), testing::random_vector(rng, 2),
                        WeightSpec::Gamma(1.0 + 3.0 * rng.uniform())};
    const auto verdicts = map_check(b, solve(b), {1e0, 1e1, 1e2, 1e3, 1e4}, 300, 1e-2, 13 + trial);
    bool seen = false;
    for (const MapVerdict& v : verdicts) {
      if (seen) CHECK(v.is_local_max);
      seen = seen || v.is_local_max;
    }
    CHECK(verdicts.back().is_local_max);
  }
}

TEST_CASE("solver risk agrees with the grid oracle on convex planar instances") {
  CounterRng rng(7, 0, "oracle");
  for (int trial = 0; trial < 6; ++trial) {
    MatrixXd anchors = testing::random_matrix(rng, testing::random_int(rng, 1, 2), 2, 1.5);
    const ProblemBase b{identity(2), LossBundle::SquaredDistance(anchors), testing::random_vector(rng, 2, 0.5),
                        WeightSpec::Gamma(1.0 + 3.0 * rng.uniform())};
    const CounterfactualResult r = solve(b);
    GridOptions grid;
    grid.box = Box{b.x0.array() - 3.0, b.x0.array() + 3.0};
    const GridSolution g = grid_solve_pi(PiInstance(b.model, b.bundle, b.x0, r.c_dagger), grid);
    REQUIRE(g.feasible);
    CHECK(std::abs(g.r_star - r.r_dagger) <= 1e-3);
  }
}
