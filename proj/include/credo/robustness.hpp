#pragma once

// Experimental harness: credibility vs. softmax classifiers, filtered
// classification (coverage / filtered accuracy), the γ sweep, and PGD attacks.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "credo/diffmodel.hpp"
#include "credo/solver.hpp"

namespace credo {

struct AttackConfig {
  double epsilon = 0.03;  // ℓ∞ budget
  int steps = 100;
  double step_size = 0.01;
  int restarts = 1;
  std::optional<Box> input_box;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AttackResult {
  VectorXd x_adv;
  double loss_achieved = 0.0;
  std::vector<double> restart_losses;  // best loss reached by each restart
  std::vector<VectorXd> restart_points;
};

// Untargeted signed-gradient ascent on ℓ_label(φ(·)). Each step is projected
// onto the ℓ∞ ball of radius ε around x and onto the input box. Restart 0
// starts at x, later restarts uniformly in the ball. Returns the iterate with
// the largest loss over all restarts and steps (earliest on ties).
AttackResult pgd_attack(const Model& model, const LossBundle& bundle, const VectorXd& x,
                        int label, const AttackConfig& cfg, std::uint64_t sample_id = 0);

// argmax with ties broken toward the smallest index.
int classify_softmax(const VectorXd& probabilities);
int classify_credibility(const VectorXd& credences);

struct FilterDecision {
  bool classify = false;
  int label = 0;
};

// Classify iff the runner-up score s₂ satisfies s₂ <= (1 - α) s₁. Scores must
// be positive.
FilterDecision filter_decision(const VectorXd& scores, double alpha);

struct CredibilityRecord {
  std::int64_t sample_id = 0;
  VectorXd c0;
  VectorXd c_dagger;
  VectorXd lambda;
  double r_dagger = 0.0;
  VectorXd softmax;
  int label = 0;
  SolveStatus status = SolveStatus::kMaxIters;
  int iterations = 0;
  Residuals residuals;
};

CredibilityRecord make_record(const Model& model, const LossBundle& bundle, const VectorXd& x0,
                              int label, const WeightSpec& weights, const SolverConfig& cfg,
                              std::int64_t sample_id);

// Solves every sample, fanning out over `jobs` threads. Output order follows
// the input order regardless of scheduling.
std::vector<CredibilityRecord> make_records(const Model& model, const LossBundle& bundle,
                                            const MatrixXd& samples, const std::vector<int>& labels,
                                            const WeightSpec& weights, const SolverConfig& cfg,
                                            int jobs = 1);

enum class ScoreSource { kSoftmax, kCredibility };
std::string_view to_string(ScoreSource source);

// Positive scores used by the filter: softmax probabilities, or exp(c† - max c†)
// for credibility (monotone in c†, so the predicted class is unchanged).
VectorXd filter_scores(const CredibilityRecord& record, ScoreSource source);

struct FilterRow {
  double alpha = 0.0;
  double coverage = 0.0;
  std::optional<double> filtered_accuracy;  // empty when nothing is classified
  int n_classified = 0;
  int n_total = 0;
};

struct FilterReport {
  ScoreSource source = ScoreSource::kSoftmax;
  std::vector<FilterRow> rows;
};

FilterReport coverage_curve(const std::vector<CredibilityRecord>& records,
                            const std::vector<double>& alphas, ScoreSource source);

// Largest α whose coverage is at least each target, for per-source tuning of
// thresholds to coverage levels.
std::vector<double> alphas_for_coverage(const std::vector<CredibilityRecord>& records,
                                        const std::vector<double>& coverage_targets,
                                        ScoreSource source);

struct GammaSweepRow {
  double gamma = 0.0;
  double median_risk = 0.0;
  double median_cred_norm = 0.0;
  int n_converged = 0;
  int n_total = 0;
  bool reliable = true;  // false when more than 10% of the solves did not converge
};

inline constexpr double kMaxNonConvergedFraction = 0.1;

std::vector<GammaSweepRow> gamma_sweep(const Model& model, const LossBundle& bundle,
                                       const MatrixXd& samples, const std::vector<double>& gammas,
                                       const SolverConfig& cfg, int jobs = 1);

double median(std::vector<double> values);

}  // namespace credo
