#include "credo/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "credo/dataset.hpp"
#include "credo/error.hpp"
#include "credo/model_io.hpp"
#include "credo/parallel.hpp"
#include "credo/robustness.hpp"
#include "credo/verify.hpp"

namespace credo {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- config

void reject_unknown_keys(const json& doc, const std::string& where,
                         std::initializer_list<const char*> known) {
  if (!doc.is_object()) throw DomainError(where + " must be a JSON object");
  for (const auto& item : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
      throw DomainError("unknown config key \"" + where + item.key() + "\"");
    }
  }
}

template <typename T>
void read(const json& doc, const char* key, T& dst, const std::string& where) {
  if (!doc.contains(key)) return;
  try {
    dst = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError("config key \"" + where + key + "\": " + e.what());
  }
}

template <typename T>
void read(const json& doc, const char* key, std::optional<T>& dst, const std::string& where) {
  if (!doc.contains(key)) return;
  T value{};
  read(doc, key, value, where);
  dst = value;
}

void read_path(const json& doc, const char* key, std::optional<std::filesystem::path>& dst) {
  std::optional<std::string> s;
  read(doc, key, s, "");
  if (s) dst = *s;
}

void parse_solver(const json& doc, RunConfig& cfg) {
  const std::string where = "solver.";
  reject_unknown_keys(doc, where,
                      {"eta_x", "eta_lambda", "max_iters", "fixed_point_tol", "stationarity_tol",
                       "divergence_norm_cap", "lambda_init", "step_decay", "clamp_to_feature_range"});
  SolverConfig& s = cfg.solver;
  read(doc, "eta_x", s.eta_x, where);
  read(doc, "eta_lambda", s.eta_lambda, where);
  read(doc, "max_iters", s.max_iters, where);
  read(doc, "fixed_point_tol", s.fixed_point_tol, where);
  read(doc, "stationarity_tol", s.stationarity_tol, where);
  read(doc, "divergence_norm_cap", s.divergence_norm_cap, where);
  read(doc, "step_decay", s.step_decay, where);
  read(doc, "clamp_to_feature_range", cfg.clamp_to_feature_range, where);
  if (doc.contains("lambda_init")) {
    const json& li = doc.at("lambda_init");
    try {
      s.lambda_init = li.is_array() ? vector_from_json(li, "lambda_init")
                                    : VectorXd::Constant(1, li.get<double>());
    } catch (const json::exception& e) {
      throw DomainError(std::string("config key \"solver.lambda_init\": ") + e.what());
    }
  }
}

void parse_weights(const json& doc, RunConfig& cfg) {
  reject_unknown_keys(doc, "weights.", {"gamma", "diag"});
  if (doc.contains("gamma") == doc.contains("diag")) {
    throw DomainError("config \"weights\" needs exactly one of \"gamma\" or \"diag\"");
  }
  try {
    cfg.weights = doc.contains("gamma") ? WeightSpec::Gamma(doc.at("gamma").get<double>())
                                        : WeightSpec::Diagonal(vector_from_json(doc.at("diag"), "diag"));
  } catch (const json::exception& e) {
    throw DomainError(std::string("config key \"weights\": ") + e.what());
  }
}

void parse_attack(const json& doc, AttackSettings& a) {
  const std::string where = "attack.";
  reject_unknown_keys(doc, where, {"epsilons", "steps", "step_size", "restarts"});
  read(doc, "epsilons", a.epsilons, where);
  read(doc, "steps", a.steps, where);
  read(doc, "step_size", a.step_size, where);
  read(doc, "restarts", a.restarts, where);
}

void parse_verify(const json& doc, VerifySettings& v) {
  const std::string where = "verify.";
  reject_unknown_keys(doc, where,
                      {"t_schedule", "map_neighbors", "map_radius", "compromise_trials",
                       "compromise_radius", "corrupt_lambda"});
  read(doc, "t_schedule", v.t_schedule, where);
  read(doc, "map_neighbors", v.map_neighbors, where);
  read(doc, "map_radius", v.map_radius, where);
  read(doc, "compromise_trials", v.compromise_trials, where);
  read(doc, "compromise_radius", v.compromise_radius, where);
  read(doc, "corrupt_lambda", v.corrupt_lambda, where);
}

bool all_in_unit_interval(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return a >= 0.0 && a <= 1.0; });
}

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

// ---------------------------------------------------------------- inputs

struct Inputs {
  Model model;
  LossBundle bundle;
  Dataset data;
};

Inputs load_inputs(const RunConfig& cfg) {
  if (!cfg.model) throw DomainError("config needs \"model\"");
  if (!cfg.dataset) throw DomainError("config needs \"dataset\"");
  Model model = load_model(*cfg.model);
  LossBundle bundle = cfg.loss ? loss_from_json(*cfg.loss) : LossBundle::CrossEntropy(model.output_dim());
  bundle.check_output_dim(model.output_dim());
  Dataset data = load_dataset(*cfg.dataset);
  if (data.dim() != model.input_dim()) {
    throw DimensionError("dataset " + cfg.dataset->string() + " features", model.input_dim(), data.dim());
  }
  data.validate(bundle.num_classes());
  cfg.weights.diagonal(bundle.num_classes());
  return Inputs{std::move(model), std::move(bundle), std::move(data)};
}

SolverConfig effective_solver(const RunConfig& cfg, const Dataset& data) {
  SolverConfig s = cfg.solver;
  if (cfg.clamp_to_feature_range) {
    if (!data.feature_range) throw DomainError("clamp_to_feature_range set but the dataset has no range");
    s.input_box = data.feature_range;
  }
  return s;
}

void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

template <typename Fn>
void emit(const std::filesystem::path& path, Fn&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_text_file(path, buf.str());
}

int count_nonconverged(const std::vector<CredibilityRecord>& records) {
  return static_cast<int>(std::count_if(records.begin(), records.end(), [](const CredibilityRecord& r) {
    return r.status != SolveStatus::kConverged;
  }));
}

bool too_many_failures(int failed, std::size_t total, double threshold) {
  return failed > 0 && static_cast<double>(failed) > threshold * static_cast<double>(total);
}

// ---------------------------------------------------------------- commands

int cmd_credibility(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(cfg);
  prepare_out_dir(cfg.out);
  const auto records = make_records(in.model, in.bundle, in.data.features, in.data.labels, cfg.weights,
                                    effective_solver(cfg, in.data), cfg.jobs);
  const std::filesystem::path path = cfg.out / "credibility.csv";
  emit(path, [&](std::ostream& o) { write_credibility_csv(o, records); });
  const int failed = count_nonconverged(records);
  out << "wrote " << path.string() << " (" << records.size() << " samples, " << failed
      << " not converged)\n";
  if (too_many_failures(failed, records.size(), cfg.max_nonconverged_fraction)) {
    err << "credibility: " << failed << " of " << records.size()
        << " solves did not converge (allowed fraction " << cfg.max_nonconverged_fraction << ")\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_filter_curve(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  std::vector<CredibilityRecord> records;
  if (cfg.credibility_csv) {
    records = read_credibility_csv(*cfg.credibility_csv);
    if (records.empty()) throw IoError(cfg.credibility_csv->string() + ": no records");
  } else {
    const Inputs in = load_inputs(cfg);
    records = make_records(in.model, in.bundle, in.data.features, in.data.labels, cfg.weights,
                           effective_solver(cfg, in.data), cfg.jobs);
  }
  prepare_out_dir(cfg.out);
  std::vector<CoverageTargetRow> targets;
  for (ScoreSource source : {ScoreSource::kSoftmax, ScoreSource::kCredibility}) {
    const FilterReport rep = coverage_curve(records, cfg.alphas, source);
    const std::filesystem::path path = cfg.out / ("filter_" + std::string(to_string(source)) + ".csv");
    emit(path, [&](std::ostream& o) { write_filter_csv(o, rep); });
    out << "wrote " << path.string() << '\n';
    if (cfg.coverage_targets.empty()) continue;
    const std::vector<double> alphas = alphas_for_coverage(records, cfg.coverage_targets, source);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const FilterReport one = coverage_curve(records, {alphas[i]}, source);
      targets.push_back({source, cfg.coverage_targets[i], one.rows.front()});
    }
  }
  if (!targets.empty()) {
    const std::filesystem::path path = cfg.out / "filter_targets.csv";
    emit(path, [&](std::ostream& o) { write_coverage_targets_csv(o, targets); });
    out << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

int cmd_attack(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(cfg);
  if (in.bundle.num_classes() < 2) throw DomainError("attacks need at least two classes");
  prepare_out_dir(cfg.out);
  const SolverConfig solver = effective_solver(cfg, in.data);
  const auto n = static_cast<std::size_t>(in.data.size());
  const auto restarts = static_cast<std::size_t>(cfg.attack.restarts);

  auto softmax_label = [&](const VectorXd& x) {
    return classify_softmax(class_probabilities(in.model, in.bundle, x));
  };
  auto credibility_label = [&](const VectorXd& x, bool& converged) {
    const CounterfactualResult r = solve_counterfactual(in.model, in.bundle, x, cfg.weights, solver);
    converged = r.status == SolveStatus::kConverged;
    return classify_credibility(r.c_dagger);
  };
  auto fraction = [n](long hits) { return static_cast<double>(hits) / static_cast<double>(n); };

  std::vector<int> clean_soft(n), clean_cred(n), clean_conv(n);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const VectorXd x = in.data.sample(static_cast<long>(i));
    bool conv = false;
    clean_soft[i] = softmax_label(x) == in.data.labels[i];
    clean_cred[i] = credibility_label(x, conv) == in.data.labels[i];
    clean_conv[i] = conv;
  });
  auto total = [](const std::vector<int>& v) { return std::count(v.begin(), v.end(), 1); };

  std::vector<AttackSummaryRow> rows;
  int worst_failures = static_cast<int>(n - total(clean_conv));
  for (std::size_t e = 0; e < cfg.attack.epsilons.size(); ++e) {
    const double eps = cfg.attack.epsilons[e];
    AttackConfig ac;
    ac.epsilon = eps;
    ac.steps = cfg.attack.steps;
    ac.step_size = cfg.attack.step_size.value_or(eps > 0.0 ? 2.5 * eps / cfg.attack.steps : 1.0);
    ac.restarts = cfg.attack.restarts;
    ac.input_box = in.data.feature_range;
    ac.seed = cfg.seed;

    Dataset adversarial = in.data;
    // Per sample: [0] best-loss point, [1 + r] restart r.
    std::vector<std::vector<int>> soft_hit(n, std::vector<int>(restarts + 1));
    std::vector<std::vector<int>> cred_hit(n, std::vector<int>(restarts + 1));
    std::vector<int> failures(n, 0);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
      const int label = in.data.labels[i];
      const AttackResult res =
          pgd_attack(in.model, in.bundle, in.data.sample(static_cast<long>(i)), label, ac, i);
      adversarial.features.row(static_cast<long>(i)) = res.x_adv.transpose();
      for (std::size_t r = 0; r <= restarts; ++r) {
        const VectorXd& x = r == 0 ? res.x_adv : res.restart_points[r - 1];
        bool conv = false;
        soft_hit[i][r] = softmax_label(x) == label;
        cred_hit[i][r] = credibility_label(x, conv) == label;
        if (r == 0 && !conv) failures[i] = 1;
      }
    });

    AttackSummaryRow row;
    row.epsilon = eps;
    row.n = static_cast<int>(n);
    row.softmax_clean = fraction(total(clean_soft));
    row.credibility_clean = fraction(total(clean_cred));
    auto column = [&](const std::vector<std::vector<int>>& hits, std::size_t r) {
      long s = 0;
      for (const auto& h : hits) s += h[r];
      return fraction(s);
    };
    row.softmax_attacked = column(soft_hit, 0);
    row.credibility_attacked = column(cred_hit, 0);
    row.softmax_best_restart = row.credibility_best_restart = 0.0;
    row.softmax_worst_restart = row.credibility_worst_restart = 1.0;
    for (std::size_t r = 1; r <= restarts; ++r) {
      row.softmax_best_restart = std::max(row.softmax_best_restart, column(soft_hit, r));
      row.softmax_worst_restart = std::min(row.softmax_worst_restart, column(soft_hit, r));
      row.credibility_best_restart = std::max(row.credibility_best_restart, column(cred_hit, r));
      row.credibility_worst_restart = std::min(row.credibility_worst_restart, column(cred_hit, r));
    }
    row.credibility_nonconverged = static_cast<int>(total(failures));
    worst_failures = std::max(worst_failures, row.credibility_nonconverged);
    row.dataset_file = "adversarial_" + std::to_string(e) + ".csv";
    save_dataset(adversarial, cfg.out / row.dataset_file);
    rows.push_back(row);
  }
  const std::filesystem::path path = cfg.out / "attack_summary.csv";
  emit(path, [&](std::ostream& o) { write_attack_summary_csv(o, rows); });
  out << "wrote " << path.string() << " and " << rows.size() << " adversarial datasets\n";
  if (too_many_failures(worst_failures, n, cfg.max_nonconverged_fraction)) {
    err << "attack: up to " << worst_failures << " of " << n
        << " credibility solves did not converge (allowed fraction " << cfg.max_nonconverged_fraction
        << ")\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_gamma_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Inputs in = load_inputs(cfg);
  prepare_out_dir(cfg.out);
  const auto rows = gamma_sweep(in.model, in.bundle, in.data.features, cfg.gammas,
                                effective_solver(cfg, in.data), cfg.jobs);
  const std::filesystem::path path = cfg.out / "gamma_sweep.csv";
  emit(path, [&](std::ostream& o) { write_gamma_sweep_csv(o, rows); });
  out << "wrote " << path.string() << '\n';
  int status = kExitOk;
  for (const GammaSweepRow& r : rows) {
    if (!r.reliable) {
      err << "gamma-sweep: gamma " << r.gamma << " converged on " << r.n_converged << " of " << r.n_total
          << " samples\n";
      status = kExitCheckFailed;
    }
  }
  return status;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  prepare_out_dir(cfg.out);
  const std::vector<VerifyRow> rows = run_verify_suite(cfg.verify, cfg.seed, cfg.jobs);
  const std::filesystem::path path = cfg.out / "verify.csv";
  emit(path, [&](std::ostream& o) { write_verify_csv(o, rows); });
  int failed = 0;
  for (const VerifyRow& r : rows) {
    if (r.pass) continue;
    ++failed;
    err << "FAILED " << r.instance << '/' << r.check << ": residual " << format_double(r.residual)
        << " > tolerance " << format_double(r.tolerance) << '\n';
  }
  out << "wrote " << path.string() << " (" << rows.size() << " checks, " << failed << " failed)\n";
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- verify suite

SolverConfig suite_solver() {
  SolverConfig s;
  s.eta_x = 1e-2;
  s.eta_lambda = 1e-2;
  s.max_iters = 2'000'000;
  s.fixed_point_tol = 1e-11;
  s.stationarity_tol = 1e-11;
  return s;
}

class SuiteRecorder {
 public:
  explicit SuiteRecorder(std::vector<VerifyRow>& rows) : rows_(rows) {}

  // Passes when residual <= tolerance.
  void at_most(const std::string& inst, const std::string& check, double residual, double tol) {
    rows_.push_back({inst, check, residual, tol, residual <= tol});
  }

 private:
  std::vector<VerifyRow>& rows_;
};

struct Family {
  std::string name;
  ProblemBase base;
  bool convex = true;
  bool oracle_at_c_dagger = false;
};

void check_solution(SuiteRecorder& rec, const Family& fam, const CounterfactualResult& res,
                    const VerifySettings& settings, std::uint64_t seed, int jobs) {
  const std::string& name = fam.name;
  const ProblemBase& b = fam.base;
  const VectorXd w = b.weights.diagonal(b.bundle.num_classes());
  rec.at_most(name, "converged", res.status == SolveStatus::kConverged ? 0.0 : 1.0, 0.0);
  rec.at_most(name, "fixed_point_identity", fixed_point_residual(res.c_dagger, res.lambda, w), 0.0);
  const VectorXd losses = b.bundle.values(b.model.forward(res.x_dagger));
  rec.at_most(name, "fixed_point", (losses - 0.5 * w.cwiseProduct(res.lambda)).cwiseAbs().maxCoeff(), 1e-6);

  const PiInstance inst(b.model, b.bundle, b.x0, res.c_dagger);
  const KktReport kkt = kkt_residuals(inst, res.x_dagger, res.lambda);
  rec.at_most(name, "kkt_stationarity", kkt.stationarity, 1e-5);
  rec.at_most(name, "kkt_comp_slack", kkt.comp_slack, 1e-5);
  rec.at_most(name, "kkt_primal_feas", kkt.primal_feas, 1e-5);
  rec.at_most(name, "kkt_dual_feas", kkt.dual_feas ? 0.0 : 1.0, 0.0);
  if (res.status != SolveStatus::kConverged) return;

  if (fam.oracle_at_c_dagger) {
    GridOptions grid;
    grid.threads = jobs;
    const GridSolution g = grid_solve_pi(inst, grid);
    const double gap = g.feasible ? std::abs(res.r_dagger - g.r_star) : std::numeric_limits<double>::infinity();
    rec.at_most(name, "oracle_gap", gap, 1e-3);
  }
  if (fam.convex) {
    const CompromiseReport cr =
        compromise_check(b, res, settings.compromise_trials, settings.compromise_radius, seed);
    rec.at_most(name, "compromise_violations", cr.violations, 0.0);
  }
  const auto verdicts =
      map_check(b, res, settings.t_schedule, settings.map_neighbors, settings.map_radius, seed);
  if (!verdicts.empty()) {
    rec.at_most(name, "map_margin", -verdicts.back().margin, kMapTolerance);
    int regressions = 0;
    bool seen = false;
    for (const MapVerdict& v : verdicts) {
      if (seen && !v.is_local_max) ++regressions;
      seen = seen || v.is_local_max;
    }
    rec.at_most(name, "map_onset_monotone", regressions, 0.0);
  }
}

void check_sensitivity(SuiteRecorder& rec, const std::string& name, const PiInstance& inst,
                       const Box& box, int jobs) {
  GridOptions grid;
  grid.box = box;
  grid.refinements = 2;
  grid.threads = jobs;
  const SensitivityResult s = sensitivity_check(inst, 1e-2, suite_solver(), grid);
  rec.at_most(name, "sensitivity", s.max_abs_diff, 1e-2);
  const GridSolution g = grid_solve_pi(inst, grid);
  rec.at_most(name, "fixed_credence_oracle_gap",
              g.feasible ? std::abs(s.solve.risk - g.r_star) : std::numeric_limits<double>::infinity(), 1e-3);
}

Box around(const VectorXd& center, double half_width) {
  return Box{center.array() - half_width, center.array() + half_width};
}

}  // namespace

// ---------------------------------------------------------------- public

void RunConfig::validate() const {
  solver.validate();
  weights.validate();
  if (jobs < 1) throw DomainError("jobs must be at least 1");
  if (!(max_nonconverged_fraction >= 0.0 && max_nonconverged_fraction <= 1.0)) {
    throw DomainError("max_nonconverged_fraction must lie in [0, 1]");
  }
  if (alphas.empty() || !all_in_unit_interval(alphas) || !std::is_sorted(alphas.begin(), alphas.end())) {
    throw DomainError("alphas must be a non-empty ascending list in [0, 1]");
  }
  if (!all_in_unit_interval(coverage_targets)) throw DomainError("coverage_targets must lie in [0, 1]");
  if (gammas.empty() || !std::all_of(gammas.begin(), gammas.end(), positive_finite)) {
    throw DomainError("gammas must be a non-empty list of positive numbers");
  }
  if (attack.epsilons.empty() ||
      !std::all_of(attack.epsilons.begin(), attack.epsilons.end(),
                   [](double e) { return e >= 0.0 && std::isfinite(e); })) {
    throw DomainError("attack.epsilons must be non-negative");
  }
  if (attack.steps < 1) throw DomainError("attack.steps must be at least 1");
  if (attack.restarts < 1) throw DomainError("attack.restarts must be at least 1");
  if (attack.step_size && !positive_finite(*attack.step_size)) {
    throw DomainError("attack.step_size must be positive");
  }
  const auto& ts = verify.t_schedule;
  if (ts.empty() || !std::all_of(ts.begin(), ts.end(), positive_finite) ||
      std::adjacent_find(ts.begin(), ts.end(), std::greater_equal<>()) != ts.end()) {
    throw DomainError("verify.t_schedule must be strictly increasing positive numbers");
  }
  if (verify.map_neighbors < 1) throw DomainError("verify.map_neighbors must be at least 1");
  if (!positive_finite(verify.map_radius)) throw DomainError("verify.map_radius must be positive");
  if (verify.compromise_trials < 0) throw DomainError("verify.compromise_trials must be non-negative");
  if (!positive_finite(verify.compromise_radius)) throw DomainError("verify.compromise_radius must be positive");
  if (loss) loss_from_json(*loss);
}

RunConfig parse_run_config(const json& doc) {
  reject_unknown_keys(doc, "",
                      {"model", "dataset", "credibility_csv", "out", "seed", "jobs", "loss", "weights",
                       "solver", "max_nonconverged_fraction", "alphas", "coverage_targets", "gammas",
                       "attack", "verify"});
  RunConfig cfg;
  read_path(doc, "model", cfg.model);
  read_path(doc, "dataset", cfg.dataset);
  read_path(doc, "credibility_csv", cfg.credibility_csv);
  std::optional<std::filesystem::path> out;
  read_path(doc, "out", out);
  if (out) cfg.out = *out;
  read(doc, "seed", cfg.seed, "");
  read(doc, "jobs", cfg.jobs, "");
  if (doc.contains("loss")) cfg.loss = doc.at("loss");
  if (doc.contains("weights")) parse_weights(doc.at("weights"), cfg);
  if (doc.contains("solver")) parse_solver(doc.at("solver"), cfg);
  read(doc, "max_nonconverged_fraction", cfg.max_nonconverged_fraction, "");
  read(doc, "alphas", cfg.alphas, "");
  read(doc, "coverage_targets", cfg.coverage_targets, "");
  read(doc, "gammas", cfg.gammas, "");
  if (doc.contains("attack")) parse_attack(doc.at("attack"), cfg.attack);
  if (doc.contains("verify")) parse_verify(doc.at("verify"), cfg.verify);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    return parse_run_config(doc);
  } catch (const Error& e) {
    throw DomainError(path.string() + ": " + e.what());
  }
}

std::vector<VerifyRow> run_verify_suite(const VerifySettings& settings, std::uint64_t seed, int jobs) {
  std::vector<VerifyRow> rows;
  SuiteRecorder rec(rows);
  const SolverConfig solver = suite_solver();
  const WeightSpec w2 = WeightSpec::Gamma(2.0);

  // Identity model, single anchor at 2, x° = 0: x† = 1, λ = 1, c† = -1, r† = 1.
  {
    Family fam{"quadratic",
               {Model::Linear(MatrixXd::Identity(1, 1), VectorXd::Zero(1)),
                LossBundle::SquaredDistance(MatrixXd::Constant(1, 1, 2.0)), VectorXd::Zero(1), w2},
               true, true};
    CounterfactualResult res = solve_counterfactual(fam.base.model, fam.base.bundle, fam.base.x0,
                                                    fam.base.weights, solver);
    if (settings.corrupt_lambda) res.lambda.array() += 0.5;
    rec.at_most(fam.name, "x_dagger_error", std::abs(res.x_dagger[0] - 1.0), 1e-4);
    rec.at_most(fam.name, "lambda_error", std::abs(res.lambda[0] - 1.0), 1e-4);
    rec.at_most(fam.name, "c_dagger_error", std::abs(res.c_dagger[0] + 1.0), 1e-4);
    rec.at_most(fam.name, "r_dagger_error", std::abs(res.r_dagger - 1.0), 1e-4);
    check_solution(rec, fam, res, settings, seed, jobs);
    const PiInstance inst(fam.base.model, fam.base.bundle, fam.base.x0, VectorXd::Constant(1, -1.0));
    check_sensitivity(rec, fam.name, inst, around(fam.base.x0, 3.0), jobs);
  }

  // Binary logistic loss on a scalar score z = x, x° = 0.3.
  {
    Family fam{"logistic_1d",
               {Model::Linear(MatrixXd::Identity(1, 1), VectorXd::Zero(1)), LossBundle::LogisticNll(2),
                VectorXd::Constant(1, 0.3), w2},
               true, false};
    const CounterfactualResult res = solve_counterfactual(fam.base.model, fam.base.bundle, fam.base.x0,
                                                          fam.base.weights, solver);
    check_solution(rec, fam, res, settings, seed, jobs);
    // First constraint forces x >= 0.8, second (x <= 1.85) is slack.
    VectorXd c(2);
    c << -softplus(-0.8), -2.0;
    const PiInstance inst(fam.base.model, fam.base.bundle, fam.base.x0, c);
    check_sensitivity(rec, fam.name, inst, around(fam.base.x0, 3.0), jobs);
  }

  // Constant model: nothing to move, so c† = c° and x† = x°.
  {
    VectorXd logits(3);
    logits << 0.2, -0.1, 0.5;
    VectorXd x0(2);
    x0 << 0.4, -0.7;
    Family fam{"constant", {Model::Constant(2, logits), LossBundle::CrossEntropy(3), x0, w2}, true, false};
    const CounterfactualResult res = solve_counterfactual(fam.base.model, fam.base.bundle, fam.base.x0,
                                                          fam.base.weights, solver);
    const VectorXd c0 = credence_at_origin(fam.base.model, fam.base.bundle, x0);
    rec.at_most(fam.name, "constant_identity", (res.c_dagger - c0).cwiseAbs().maxCoeff(), 1e-6);
    rec.at_most(fam.name, "x_unchanged", (res.x_dagger - x0).cwiseAbs().maxCoeff(), 0.0);
    check_solution(rec, fam, res, settings, seed, jobs);
  }

  // Three-class cross-entropy on a linear model in the plane.
  {
    MatrixXd wm(3, 2);
    wm << 1.0, 0.0, 0.0, 1.0, -1.0, -1.0;
    VectorXd x0(2);
    x0 << 0.5, 0.2;
    Family fam{"linear_ce_2d", {Model::Linear(wm, VectorXd::Zero(3)), LossBundle::CrossEntropy(3), x0, w2},
               true, false};
    const CounterfactualResult res = solve_counterfactual(fam.base.model, fam.base.bundle, fam.base.x0,
                                                          fam.base.weights, solver);
    check_solution(rec, fam, res, settings, seed, jobs);
  }

  // Two anchors above and below the first axis; the feasible set is a lens.
  {
    MatrixXd anchors(2, 2);
    anchors << 1.0, 1.0, 1.0, -1.0;
    Family fam{"lens_2d",
               {Model::Linear(MatrixXd::Identity(2, 2), VectorXd::Zero(2)),
                LossBundle::SquaredDistance(anchors), VectorXd::Zero(2), w2},
               true, true};
    const CounterfactualResult res = solve_counterfactual(fam.base.model, fam.base.bundle, fam.base.x0,
                                                          fam.base.weights, solver);
    check_solution(rec, fam, res, settings, seed, jobs);
    const PiInstance inst(fam.base.model, fam.base.bundle, fam.base.x0, VectorXd::Constant(2, -1.44));
    check_sensitivity(rec, fam.name, inst, around(fam.base.x0, 1.5), jobs);
  }

  // Positive credences cannot be met by non-negative losses.
  {
    const PiInstance inst(Model::Linear(MatrixXd::Identity(1, 1), VectorXd::Zero(1)),
                          LossBundle::SquaredDistance(MatrixXd::Constant(1, 1, 2.0)), VectorXd::Zero(1),
                          VectorXd::Constant(1, 0.5));
    GridOptions grid;
    grid.threads = jobs;
    const GridSolution g = grid_solve_pi(inst, grid);
    rec.at_most("infeasible_probe", "grid_reports_infeasible", g.feasible ? 1.0 : 0.0, 0.0);
  }
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Credibility profiles for classifier predictions"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--seed", seed, "Seed for every random draw (overrides config)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--jobs", jobs, "Worker threads (overrides config)");

  using Command = int (*)(const RunConfig&, std::ostream&, std::ostream&);
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"credibility", {"Solve for c† on every sample; writes credibility.csv", cmd_credibility}},
      {"filter-curve", {"Coverage and filtered accuracy over the alpha grid", cmd_filter_curve}},
      {"attack", {"PGD attack; clean vs attacked accuracy for both classifiers", cmd_attack}},
      {"verify", {"Run the built-in verification suite; writes verify.csv", cmd_verify}},
      {"gamma-sweep", {"Median risk and credence norm for W = gamma I", cmd_gamma_sweep}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = config_path ? load_run_config(*config_path) : RunConfig{};
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out = *out_dir;
    if (jobs) cfg.jobs = *jobs;
    cfg.validate();
    for (const auto& [name, entry] : commands) {
      if (app.got_subcommand(name)) return entry.second(cfg, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace credo
