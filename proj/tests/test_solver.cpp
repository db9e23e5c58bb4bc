#include <doctest.h>

#include <cmath>

#include "credo/error.hpp"
#include "credo/solver.hpp"
#include "credo/verify.hpp"
#include "support.hpp"

using namespace credo;

namespace {

Model identity1() { return Model::Linear(MatrixXd::Identity(1, 1), VectorXd::Zero(1)); }
LossBundle anchor_at(double a) { return LossBundle::SquaredDistance(MatrixXd::Constant(1, 1, a)); }

SolverConfig tight(double eta_x = 1e-2, double eta_lambda = 1e-2) {
  SolverConfig cfg;
  cfg.eta_x = eta_x;
  cfg.eta_lambda = eta_lambda;
  cfg.max_iters = 1'000'000;
  cfg.fixed_point_tol = 1e-11;
  cfg.stationarity_tol = 1e-11;
  return cfg;
}

double softplus_ref(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }
double sigmoid_ref(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Binary logistic on z = x with class 0 positive: ℓ₀ = softplus(-x),
// ℓ₁ = softplus(x). At the counterfactual fixed point λ_k = 2ℓ_k/w_k, so x†
// solves g(x) = 2(x - x°) + (2/w)[ℓ₀ℓ₀' + ℓ₁ℓ₁'] = 0. The oracle scans a grid
// for a sign change of g and bisects.
struct LogisticOracle {
  double x;
  double lambda0;
  double lambda1;
};

LogisticOracle logistic_oracle(double x0, double w) {
  auto g = [&](double x) {
    const double l0 = softplus_ref(-x), l1 = softplus_ref(x);
    return 2.0 * (x - x0) + (2.0 / w) * (l0 * -sigmoid_ref(-x) + l1 * sigmoid_ref(x));
  };
  double lo = -5.0;
  double hi = lo;
  for (double x = -5.0; x <= 5.0; x += 1e-4) {
    if (g(x) <= 0.0 && g(x + 1e-4) >= 0.0) {
      lo = x;
      hi = x + 1e-4;
      break;
    }
  }
  REQUIRE(hi > lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) <= 0.0 ? lo : hi) = mid;
  }
  const double x = 0.5 * (lo + hi);
  return {x, 2.0 * softplus_ref(-x) / w, 2.0 * softplus_ref(x) / w};
}

}  // namespace

TEST_CASE("dual step on hand-checked inputs") {
  const auto one = [](double v) { return VectorXd::Constant(1, v); };
  CHECK(dual_step(one(0.5), one(1.0), one(0.2), 0.1)[0] == doctest::Approx(1.04).epsilon(1e-14));
  CHECK(dual_step(one(0.0), one(0.0), one(1.0), 0.5)[0] == 0.0);
  CHECK(dual_step(one(0.0), one(0.1), one(4.0), 1.0)[0] == 0.0);
}

TEST_CASE("primal step on hand-checked inputs") {
  CounterRng rng(1, 0, "primal");
  const Model lin = Model::Linear(testing::random_matrix(rng, 2, 3), testing::random_vector(rng, 2));
  const VectorXd x0 = testing::random_vector(rng, 3);
  const auto unchanged = primal_step(lin, LossBundle::CrossEntropy(2), x0, VectorXd::Zero(2), x0, 0.1);
  REQUIRE(unchanged);
  CHECK(*unchanged == x0);

  const auto step = primal_step(identity1(), anchor_at(2.0), VectorXd::Ones(1), VectorXd::Ones(1),
                                VectorXd::Zero(1), 0.1);
  REQUIRE(step);
  CHECK((*step)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("primal step matches a direct recomputation on random MLP instances") {
  CounterRng rng(2, 0, "primal-mlp");
  for (int trial = 0; trial < 40; ++trial) {
    const Model m = testing::random_mlp(rng, 3, 3, Activation::kSoftplus);
    const LossBundle b = LossBundle::CrossEntropy(3);
    const VectorXd x0 = testing::random_vector(rng, 3);
    const VectorXd x = testing::random_vector(rng, 3);
    const VectorXd lambda = testing::random_vector(rng, 3).cwiseAbs();
    VectorXd expected = 2.0 * (x - x0);
    for (int k = 0; k < 3; ++k) expected += lambda[k] * testing::finite_difference_gradient(m, b, x, k);
    expected = x - 0.05 * expected;
    const auto got = primal_step(m, b, x, lambda, x0, 0.05);
    REQUIRE(got);
    CHECK((*got - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("quadratic instance reaches its closed-form fixed point") {
  const CounterfactualResult r =
      solve_counterfactual(identity1(), anchor_at(2.0), VectorXd::Zero(1), WeightSpec::Gamma(2.0), SolverConfig{});
  CHECK(r.status == SolveStatus::kConverged);
  CHECK(r.iterations <= 50'000);
  CHECK(std::abs(r.x_dagger[0] - 1.0) <= 1e-4);
  CHECK(std::abs(r.lambda[0] - 1.0) <= 1e-4);
  CHECK(std::abs(r.c_dagger[0] + 1.0) <= 1e-4);
  CHECK(std::abs(r.r_dagger - 1.0) <= 1e-4);
}

TEST_CASE("quadratic closed form agrees with a brute-force scan of the joint objective") {
  // x² + (x - 2)⁴ / 2 is the joint objective after eliminating c = -ℓ(x).
  double best_x = 0.0, best = INFINITY;
  for (long j = -50'000; j <= 50'000; ++j) {
    const double x = j * 1e-4;
    const double v = x * x + std::pow(x - 2.0, 4) / 2.0;
    if (v < best) best = v, best_x = x;
  }
  CHECK(best_x == doctest::Approx(1.0).epsilon(1e-4));
  const PiInstance inst(identity1(), anchor_at(2.0), VectorXd::Zero(1), VectorXd::Constant(1, -1.0));
  GridOptions grid;
  grid.step = 1e-4;
  const GridSolution g = grid_solve_pi(inst, grid);
  REQUIRE(g.feasible);
  CHECK(g.r_star == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("two-class logistic instance matches the scan-and-bisect oracle") {
  for (double x0 : {0.0, 0.3, -1.2}) {
    CAPTURE(x0);
    const LogisticOracle o = logistic_oracle(x0, 1.0);
    const CounterfactualResult r = solve_counterfactual(identity1(), LossBundle::LogisticNll(2),
                                                        VectorXd::Constant(1, x0), WeightSpec::Gamma(1.0), tight());
    REQUIRE(r.status == SolveStatus::kConverged);
    CHECK(std::abs(r.x_dagger[0] - o.x) <= 1e-4);
    CHECK(std::abs(r.lambda[0] - o.lambda0) <= 1e-4);
    CHECK(std::abs(r.lambda[1] - o.lambda1) <= 1e-4);
  }
  const LogisticOracle sym = logistic_oracle(0.0, 1.0);
  CHECK(std::abs(sym.x) < 1e-10);
  CHECK(sym.lambda0 == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("constant model keeps x and turns raw credences into the profile") {
  CounterRng rng(3, 0, "constant");
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd logits = testing::random_vector(rng, 3, 2.0);
    const Model m = Model::Constant(2, logits);
    const LossBundle b = LossBundle::CrossEntropy(3);
    const VectorXd x0 = testing::random_vector(rng, 2);
    VectorXd w(3);
    w << 0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform();
    const CounterfactualResult r = solve_counterfactual(m, b, x0, WeightSpec::Diagonal(w), SolverConfig{});
    REQUIRE(r.status == SolveStatus::kConverged);
    CHECK(r.x_dagger == x0);
    const VectorXd c0 = credence_at_origin(m, b, x0);
    CHECK((r.c_dagger - c0).cwiseAbs().maxCoeff() <= SolverConfig{}.fixed_point_tol);
    for (int k = 0; k < 3; ++k) CHECK(r.lambda[k] == doctest::Approx(-2.0 * c0[k] / w[k]).epsilon(1e-5));
  }
}

// Random convex and non-convex instances; the properties below must hold for
// every result regardless of model kind.
TEST_CASE("returned results satisfy the solver invariants") {
  CounterRng rng(4, 0, "invariants");
  int converged = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const ModelKind mk = trial % 3 == 0 ? ModelKind::kLinear : (trial % 3 == 1 ? ModelKind::kMlp : ModelKind::kConstant);
    const Model m = testing::random_model(rng, mk, 2, 3);
    const LossBundle b = LossBundle::CrossEntropy(3);
    const VectorXd x0 = testing::random_vector(rng, 2);
    const WeightSpec ws = WeightSpec::Gamma(1.0 + 5.0 * rng.uniform());
    SolverConfig cfg;
    cfg.eta_x = 1e-2;
    const CounterfactualResult r = solve_counterfactual(m, b, x0, ws, cfg);
    const VectorXd w = ws.diagonal(3);
    CHECK((r.lambda.array() >= 0.0).all());
    CHECK(r.r_dagger >= 0.0);
    const VectorXd coupled = -(0.5 * w.cwiseProduct(r.lambda));
    CHECK(r.c_dagger == coupled);

    const CounterfactualResult again = solve_counterfactual(m, b, x0, ws, cfg);
    CHECK(again.x_dagger == r.x_dagger);
    CHECK(again.lambda == r.lambda);
    CHECK(again.iterations == r.iterations);

    if (r.status != SolveStatus::kConverged) continue;
    ++converged;
    CHECK(r.residuals.fixed_point <= cfg.fixed_point_tol);
    CHECK(r.residuals.stationarity <= cfg.stationarity_tol);
    const VectorXd losses = b.values(m.forward(r.x_dagger));
    CHECK(((losses + r.c_dagger).array() <= cfg.fixed_point_tol).all());
  }
  CHECK(converged >= 50);
}

TEST_CASE("multipliers stay non-negative after every iteration") {
  CounterRng rng(5, 0, "projection");
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = testing::random_mlp(rng, 2, 3, Activation::kTanh);
    const LossBundle b = LossBundle::CrossEntropy(3);
    const VectorXd x0 = testing::random_vector(rng, 2);
    const VectorXd w = VectorXd::Constant(3, 0.5 + 4.0 * rng.uniform());
    VectorXd x = x0;
    VectorXd lambda = testing::random_vector(rng, 3).cwiseAbs();
    for (int it = 0; it < 2000; ++it) {
      const VectorXd losses = b.values(m.forward(x));
      const auto next = primal_step(m, b, x, lambda, x0, 1e-2);
      REQUIRE(next);
      x = *next;
      lambda = dual_step(losses, lambda, w, 0.2);
      REQUIRE((lambda.array() >= 0.0).all());
    }
  }
}

TEST_CASE("oversized primal steps are reported as divergence") {
  SolverConfig cfg;
  cfg.eta_x = 5.0;
  const CounterfactualResult r =
      solve_counterfactual(identity1(), anchor_at(2.0), VectorXd::Zero(1), WeightSpec::Gamma(2.0), cfg);
  CHECK(r.status == SolveStatus::kDiverged);
}

TEST_CASE("iteration limit is reported as MaxIters with the last iterate") {
  SolverConfig cfg;
  cfg.max_iters = 3;
  const CounterfactualResult r =
      solve_counterfactual(identity1(), anchor_at(2.0), VectorXd::Zero(1), WeightSpec::Gamma(2.0), cfg);
  CHECK(r.status == SolveStatus::kMaxIters);
  CHECK(r.iterations == 3);
  CHECK(r.residuals.stationarity > 0.0);
}

TEST_CASE("optional input box clamps every iterate") {
  SolverConfig cfg;
  cfg.input_box = Box{VectorXd::Constant(1, -0.5), VectorXd::Constant(1, 0.5)};
  const CounterfactualResult r =
      solve_counterfactual(identity1(), anchor_at(2.0), VectorXd::Zero(1), WeightSpec::Gamma(2.0), cfg);
  CHECK(r.x_dagger[0] <= 0.5);
  CHECK(r.x_dagger[0] >= -0.5);
}

TEST_CASE("weights and solver settings are validated") {
  CHECK_THROWS_AS(WeightSpec::Gamma(0.0).validate(), DomainError);
  CHECK_THROWS_AS(WeightSpec::Gamma(-1.0).validate(), DomainError);
  CHECK_THROWS_AS(WeightSpec::Diagonal(VectorXd::Ones(2)).diagonal(3), DimensionError);
  VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(WeightSpec::Diagonal(bad).validate(), DomainError);
  CHECK(WeightSpec::Gamma(3.0).diagonal(2) == VectorXd::Constant(2, 3.0));

  SolverConfig cfg;
  cfg.eta_x = 0.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = SolverConfig{};
  cfg.max_iters = -1;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  cfg = SolverConfig{};
  cfg.lambda_init = -VectorXd::Ones(1);
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("fixed-credence solver recovers the quadratic dual") {
  const FixedCredenceResult r =
      solve_fixed_credence(identity1(), anchor_at(2.0), VectorXd::Zero(1), VectorXd::Constant(1, -1.0), tight());
  REQUIRE(r.status == SolveStatus::kConverged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.lambda[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.risk == doctest::Approx(1.0).epsilon(1e-8));
}
