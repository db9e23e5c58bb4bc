#include "credo/report.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "credo/dataset.hpp"
#include "credo/error.hpp"

namespace credo {

namespace {

void write_vector_header(std::ostream& out, const char* prefix, long k) {
  for (long i = 0; i < k; ++i) out << ',' << prefix << i;
}

void write_vector(std::ostream& out, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

double to_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(where + ": cannot parse number \"" + s + "\"");
  }
  return v;
}

SolveStatus status_from_string(const std::string& s, const std::string& where) {
  for (SolveStatus st : {SolveStatus::kConverged, SolveStatus::kMaxIters, SolveStatus::kDiverged}) {
    if (s == to_string(st)) return st;
  }
  throw IoError(where + ": unknown status \"" + s + "\"");
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

void write_credibility_csv(std::ostream& out, const std::vector<CredibilityRecord>& records) {
  const long k = records.empty() ? 0 : records.front().c0.size();
  out << "sample_id,label,status,iterations,r_dagger,res_fixed_point,res_stationarity,res_comp_slack";
  write_vector_header(out, "c0_", k);
  write_vector_header(out, "c_dagger_", k);
  write_vector_header(out, "lambda_", k);
  write_vector_header(out, "softmax_", k);
  out << '\n';
  for (const CredibilityRecord& r : records) {
    out << r.sample_id << ',' << r.label << ',' << to_string(r.status) << ',' << r.iterations << ','
        << format_double(r.r_dagger) << ',' << format_double(r.residuals.fixed_point) << ','
        << format_double(r.residuals.stationarity) << ',' << format_double(r.residuals.comp_slack);
    write_vector(out, r.c0);
    write_vector(out, r.c_dagger);
    write_vector(out, r.lambda);
    write_vector(out, r.softmax);
    out << '\n';
  }
}

std::vector<CredibilityRecord> read_credibility_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open credibility file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ":1: missing header row");
  const std::vector<std::string> header = split(line);
  constexpr std::size_t kFixed = 8;
  if (header.size() < kFixed || header[0] != "sample_id" || header[7] != "res_comp_slack" ||
      (header.size() - kFixed) % 4 != 0) {
    throw IoError(path.string() + ":1: not a credibility report header");
  }
  const long k = static_cast<long>((header.size() - kFixed) / 4);
  std::vector<CredibilityRecord> records;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw IoError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                    std::to_string(cells.size()));
    }
    CredibilityRecord r;
    r.sample_id = static_cast<std::int64_t>(to_double(cells[0], where));
    r.label = static_cast<int>(to_double(cells[1], where));
    r.status = status_from_string(cells[2], where);
    r.iterations = static_cast<int>(to_double(cells[3], where));
    r.r_dagger = to_double(cells[4], where);
    r.residuals.fixed_point = to_double(cells[5], where);
    r.residuals.stationarity = to_double(cells[6], where);
    r.residuals.comp_slack = to_double(cells[7], where);
    VectorXd* blocks[] = {&r.c0, &r.c_dagger, &r.lambda, &r.softmax};
    std::size_t col = kFixed;
    for (VectorXd* block : blocks) {
      block->resize(k);
      for (long i = 0; i < k; ++i) (*block)[i] = to_double(cells[col++], where);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_filter_csv(std::ostream& out, const FilterReport& report) {
  out << "alpha,coverage,filtered_accuracy,n_classified,n_total\n";
  for (const FilterRow& row : report.rows) {
    out << format_double(row.alpha) << ',' << format_double(row.coverage) << ','
        << optional_cell(row.filtered_accuracy) << ',' << row.n_classified << ',' << row.n_total << '\n';
  }
}

void write_coverage_targets_csv(std::ostream& out, const std::vector<CoverageTargetRow>& rows) {
  out << "source,coverage_target,alpha,coverage,filtered_accuracy,n_classified,n_total\n";
  for (const CoverageTargetRow& r : rows) {
    out << to_string(r.source) << ',' << format_double(r.target) << ',' << format_double(r.row.alpha)
        << ',' << format_double(r.row.coverage) << ',' << optional_cell(r.row.filtered_accuracy) << ','
        << r.row.n_classified << ',' << r.row.n_total << '\n';
  }
}

void write_gamma_sweep_csv(std::ostream& out, const std::vector<GammaSweepRow>& rows) {
  out << "gamma,median_risk,median_cred_norm,n_converged,n_total,reliable\n";
  for (const GammaSweepRow& r : rows) {
    out << format_double(r.gamma) << ',' << format_double(r.median_risk) << ','
        << format_double(r.median_cred_norm) << ',' << r.n_converged << ',' << r.n_total << ','
        << (r.reliable ? "true" : "false") << '\n';
  }
}

void write_verify_csv(std::ostream& out, const std::vector<VerifyRow>& rows) {
  out << "instance,check,residual,tolerance,pass\n";
  for (const VerifyRow& r : rows) {
    out << r.instance << ',' << r.check << ',' << format_double(r.residual) << ','
        << format_double(r.tolerance) << ',' << (r.pass ? "pass" : "fail") << '\n';
  }
}

void write_attack_summary_csv(std::ostream& out, const std::vector<AttackSummaryRow>& rows) {
  out << "epsilon,n,softmax_clean_acc,softmax_attacked_acc,softmax_drop,softmax_best_restart_acc,"
         "softmax_worst_restart_acc,credibility_clean_acc,credibility_attacked_acc,credibility_drop,"
         "credibility_best_restart_acc,credibility_worst_restart_acc,credibility_nonconverged,"
         "dataset_file\n";
  for (const AttackSummaryRow& r : rows) {
    out << format_double(r.epsilon) << ',' << r.n << ',' << format_double(r.softmax_clean) << ','
        << format_double(r.softmax_attacked) << ',' << format_double(r.softmax_clean - r.softmax_attacked)
        << ',' << format_double(r.softmax_best_restart) << ',' << format_double(r.softmax_worst_restart)
        << ',' << format_double(r.credibility_clean) << ',' << format_double(r.credibility_attacked) << ','
        << format_double(r.credibility_clean - r.credibility_attacked) << ','
        << format_double(r.credibility_best_restart) << ',' << format_double(r.credibility_worst_restart)
        << ',' << r.credibility_nonconverged << ',' << r.dataset_file << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace credo
