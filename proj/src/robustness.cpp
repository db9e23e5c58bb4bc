#include "credo/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "credo/error.hpp"
#include "credo/parallel.hpp"
#include "credo/rng.hpp"

namespace credo {

namespace {

int argmax_first(const VectorXd& v) {
  if (v.size() == 0) throw DomainError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
}

// 1 - s₂/s₁: the largest α at which the sample is still classified.
double critical_alpha(const VectorXd& scores) {
  const int top = argmax_first(scores);
  double second = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i != top) second = std::max(second, scores[i]);
  }
  return 1.0 - second / scores[top];
}

}  // namespace

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be non-negative");
  if (steps < 1) throw DomainError("steps must be at least 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw DomainError("step_size must be positive");
  if (restarts < 1) throw DomainError("restarts must be at least 1");
  if (input_box && (input_box->lower.array() > input_box->upper.array()).any()) {
    throw DomainError("input box has lower > upper");
  }
}

AttackResult pgd_attack(const Model& model, const LossBundle& bundle, const VectorXd& x, int label,
                        const AttackConfig& cfg, std::uint64_t sample_id) {
  cfg.validate();
  if (cfg.input_box && !cfg.input_box->contains(x)) {
    throw DomainError("attack input lies outside the input box");
  }
  auto loss_at = [&](const VectorXd& p) { return bundle.value(model.forward(p), label); };

  AttackResult out;
  out.x_adv = x;
  out.loss_achieved = loss_at(x);
  if (cfg.epsilon == 0.0) {
    out.restart_losses.assign(static_cast<std::size_t>(cfg.restarts), out.loss_achieved);
    out.restart_points.assign(static_cast<std::size_t>(cfg.restarts), x);
    return out;
  }

  VectorXd lo = x.array() - cfg.epsilon;
  VectorXd hi = x.array() + cfg.epsilon;
  if (cfg.input_box) {
    lo = lo.cwiseMax(cfg.input_box->lower);
    hi = hi.cwiseMin(cfg.input_box->upper);
  }

  CounterRng rng(cfg.seed, sample_id, "pgd");
  bool have_best = false;
  for (int r = 0; r < cfg.restarts; ++r) {
    VectorXd cur = x;
    if (r > 0) {
      for (Eigen::Index i = 0; i < cur.size(); ++i) cur[i] = rng.uniform(lo[i], hi[i]);
    }
    VectorXd best_pt = cur;
    double best = loss_at(cur);
    for (int s = 0; s < cfg.steps; ++s) {
      const VectorXd g = input_gradient(model, bundle, cur, label);
      cur = (cur + cfg.step_size * g.unaryExpr(&sign)).cwiseMax(lo).cwiseMin(hi);
      const double l = loss_at(cur);
      if (l > best) {
        best = l;
        best_pt = cur;
      }
    }
    out.restart_losses.push_back(best);
    out.restart_points.push_back(best_pt);
    if (!have_best || best > out.loss_achieved) {
      // Restart 0 starts at x, so its best is never below the clean loss.
      have_best = true;
      out.loss_achieved = best;
      out.x_adv = best_pt;
    }
  }
  return out;
}

int classify_softmax(const VectorXd& probabilities) { return argmax_first(probabilities); }

int classify_credibility(const VectorXd& credences) {
  if (!credences.allFinite()) throw DomainError("credences have non-finite entries");
  return argmax_first(credences);
}

FilterDecision filter_decision(const VectorXd& scores, double alpha) {
  if (scores.size() < 2) throw DomainError("filtering needs at least two classes");
  check_alpha(alpha);
  if (!scores.allFinite() || (scores.array() < 0.0).any() || !(scores.maxCoeff() > 0.0)) {
    throw DomainError("filter scores must be finite, non-negative and not all zero");
  }
  FilterDecision d;
  d.label = argmax_first(scores);
  double second = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i != d.label) second = std::max(second, scores[i]);
  }
  d.classify = second <= (1.0 - alpha) * scores[d.label];
  return d;
}

CredibilityRecord make_record(const Model& model, const LossBundle& bundle, const VectorXd& x0,
                              int label, const WeightSpec& weights, const SolverConfig& cfg,
                              std::int64_t sample_id) {
  if (label < 0 || label >= bundle.num_classes()) {
    throw DomainError("label " + std::to_string(label) + " out of range");
  }
  CredibilityRecord rec;
  rec.sample_id = sample_id;
  rec.label = label;
  rec.c0 = credence_at_origin(model, bundle, x0);
  rec.softmax = softmax(rec.c0);
  const CounterfactualResult res = solve_counterfactual(model, bundle, x0, weights, cfg);
  rec.c_dagger = res.c_dagger;
  rec.lambda = res.lambda;
  rec.r_dagger = res.r_dagger;
  rec.status = res.status;
  rec.iterations = res.iterations;
  rec.residuals = res.residuals;
  return rec;
}

std::vector<CredibilityRecord> make_records(const Model& model, const LossBundle& bundle,
                                            const MatrixXd& samples, const std::vector<int>& labels,
                                            const WeightSpec& weights, const SolverConfig& cfg,
                                            int jobs) {
  if (static_cast<std::size_t>(samples.rows()) != labels.size()) {
    throw DimensionError("labels", samples.rows(), static_cast<long>(labels.size()));
  }
  std::vector<CredibilityRecord> out(labels.size());
  parallel_for(labels.size(), jobs, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    out[i] = make_record(model, bundle, samples.row(row).transpose(), labels[i], weights, cfg,
                         static_cast<std::int64_t>(i));
  });
  return out;
}

std::string_view to_string(ScoreSource source) {
  return source == ScoreSource::kSoftmax ? "softmax" : "credibility";
}

VectorXd filter_scores(const CredibilityRecord& record, ScoreSource source) {
  if (source == ScoreSource::kSoftmax) return record.softmax;
  return (record.c_dagger.array() - record.c_dagger.maxCoeff()).exp();
}

FilterReport coverage_curve(const std::vector<CredibilityRecord>& records,
                            const std::vector<double>& alphas, ScoreSource source) {
  if (records.empty()) throw DomainError("coverage curve needs at least one record");
  if (!std::is_sorted(alphas.begin(), alphas.end())) throw DomainError("alphas must be sorted ascending");
  FilterReport rep;
  rep.source = source;
  for (double alpha : alphas) {
    check_alpha(alpha);
    FilterRow row;
    row.alpha = alpha;
    row.n_total = static_cast<int>(records.size());
    int correct = 0;
    for (const CredibilityRecord& rec : records) {
      const FilterDecision d = filter_decision(filter_scores(rec, source), alpha);
      if (!d.classify) continue;
      ++row.n_classified;
      if (d.label == rec.label) ++correct;
    }
    row.coverage = static_cast<double>(row.n_classified) / row.n_total;
    if (row.n_classified > 0) row.filtered_accuracy = static_cast<double>(correct) / row.n_classified;
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<double> alphas_for_coverage(const std::vector<CredibilityRecord>& records,
                                        const std::vector<double>& coverage_targets,
                                        ScoreSource source) {
  if (records.empty()) throw DomainError("coverage targets need at least one record");
  std::vector<std::pair<double, VectorXd>> crit;
  for (const CredibilityRecord& rec : records) {
    VectorXd scores = filter_scores(rec, source);
    const double a = critical_alpha(scores);
    crit.emplace_back(a, std::move(scores));
  }
  std::sort(crit.begin(), crit.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double n = static_cast<double>(crit.size());
  std::vector<double> out;
  for (double q : coverage_targets) {
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("coverage target must lie in [0, 1]");
    const auto need = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    if (need == 0) {
      out.push_back(1.0);
      continue;
    }
    const auto& [a, scores] = crit[need - 1];
    double alpha = std::clamp(a, 0.0, 1.0);
    // Rounding in 1 - s₂/s₁ can leave the boundary sample just unclassified.
    while (alpha > 0.0 && !filter_decision(scores, alpha).classify) alpha = std::nextafter(alpha, 0.0);
    out.push_back(alpha);
  }
  return out;
}

std::vector<GammaSweepRow> gamma_sweep(const Model& model, const LossBundle& bundle,
                                       const MatrixXd& samples, const std::vector<double>& gammas,
                                       const SolverConfig& cfg, int jobs) {
  if (samples.rows() == 0) throw DomainError("gamma sweep needs at least one sample");
  std::vector<GammaSweepRow> rows;
  for (double gamma : gammas) {
    const WeightSpec weights = WeightSpec::Gamma(gamma);
    std::vector<CounterfactualResult> results(static_cast<std::size_t>(samples.rows()));
    parallel_for(results.size(), jobs, [&](std::size_t i) {
      results[i] = solve_counterfactual(model, bundle, samples.row(static_cast<Eigen::Index>(i)).transpose(),
                                        weights, cfg);
    });
    std::vector<double> risks;
    std::vector<double> norms;
    for (const CounterfactualResult& r : results) {
      if (r.status != SolveStatus::kConverged) continue;
      risks.push_back(r.r_dagger);
      norms.push_back(r.c_dagger.squaredNorm());
    }
    GammaSweepRow row;
    row.gamma = gamma;
    row.n_total = static_cast<int>(results.size());
    row.n_converged = static_cast<int>(risks.size());
    row.median_risk = median(risks);
    row.median_cred_norm = median(norms);
    row.reliable = row.n_converged > 0 &&
                   static_cast<double>(row.n_total - row.n_converged) <=
                       kMaxNonConvergedFraction * row.n_total;
    rows.push_back(row);
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace credo
