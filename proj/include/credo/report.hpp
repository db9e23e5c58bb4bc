#pragma once

// CSV emitters for every report the command-line tool writes. All numbers use
// 17 significant digits; see docs/reports.md for column meanings.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "credo/robustness.hpp"

namespace credo {

void write_credibility_csv(std::ostream& out, const std::vector<CredibilityRecord>& records);
// Reads a file produced by write_credibility_csv. Throws IoError with file and
// line on malformed input.
std::vector<CredibilityRecord> read_credibility_csv(const std::filesystem::path& path);

void write_filter_csv(std::ostream& out, const FilterReport& report);

struct CoverageTargetRow {
  ScoreSource source = ScoreSource::kSoftmax;
  double target = 0.0;
  FilterRow row;
};
void write_coverage_targets_csv(std::ostream& out, const std::vector<CoverageTargetRow>& rows);

void write_gamma_sweep_csv(std::ostream& out, const std::vector<GammaSweepRow>& rows);

struct VerifyRow {
  std::string instance;
  std::string check;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};
void write_verify_csv(std::ostream& out, const std::vector<VerifyRow>& rows);

struct AttackSummaryRow {
  double epsilon = 0.0;
  int n = 0;
  double softmax_clean = 0.0;
  double softmax_attacked = 0.0;
  double softmax_best_restart = 0.0;
  double softmax_worst_restart = 0.0;
  double credibility_clean = 0.0;
  double credibility_attacked = 0.0;
  double credibility_best_restart = 0.0;
  double credibility_worst_restart = 0.0;
  int credibility_nonconverged = 0;
  std::string dataset_file;
};
void write_attack_summary_csv(std::ostream& out, const std::vector<AttackSummaryRow>& rows);

// Writes `contents` to `path`, replacing any existing file.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace credo
