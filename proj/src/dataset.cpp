#include "credo/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "credo/error.hpp"
#include "credo/model_io.hpp"

namespace credo {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw IoError(where + ": cannot parse number \"" + s + "\"");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void Dataset::validate(int num_classes) const {
  if (features.rows() < 1) throw DomainError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DimensionError("dataset labels", features.rows(), static_cast<long>(labels.size()));
  }
  if (!features.allFinite()) throw DomainError("dataset has non-finite features");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw DomainError("sample " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                        " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  if (feature_range) {
    if (feature_range->lower.size() != dim() || feature_range->upper.size() != dim()) {
      throw DimensionError("feature range", dim(), feature_range->lower.size());
    }
  }
}

std::filesystem::path range_sidecar_path(const std::filesystem::path& dataset_path) {
  return std::filesystem::path(dataset_path.string() + ".range.json");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ":1: missing header row");
  const std::vector<std::string> header = split_csv_line(line);
  long label_col = -1;
  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") {
      if (label_col >= 0) throw IoError(path.string() + ":1: duplicate \"label\" column");
      label_col = static_cast<long>(c);
    } else {
      data.feature_names.push_back(header[c]);
    }
  }
  if (label_col < 0) throw IoError(path.string() + ":1: no \"label\" column");
  if (data.feature_names.empty()) throw IoError(path.string() + ":1: no feature columns");

  std::vector<std::vector<double>> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw IoError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                    std::to_string(cells.size()));
    }
    std::vector<double> feats;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<long>(c) == label_col) {
        const double v = parse_double(cells[c], where);
        if (v != std::floor(v) || v < 0) throw IoError(where + ": label must be a non-negative integer");
        data.labels.push_back(static_cast<int>(v));
      } else {
        feats.push_back(parse_double(cells[c], where));
      }
    }
    rows.push_back(std::move(feats));
  }
  if (rows.empty()) throw IoError(path.string() + ": dataset has no samples");
  data.features.resize(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(data.feature_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }

  const std::filesystem::path sidecar = range_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream rin(sidecar);
    try {
      nlohmann::json doc;
      rin >> doc;
      Box box{vector_from_json(doc.at("lower"), "lower"), vector_from_json(doc.at("upper"), "upper")};
      if (box.lower.size() != data.dim() || box.upper.size() != data.dim()) {
        throw IoError(sidecar.string() + ": range has wrong dimension");
      }
      data.feature_range = std::move(box);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(sidecar.string() + ": " + e.what());
    }
  }
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (long c = 0; c < data.dim(); ++c) {
    out << (static_cast<std::size_t>(c) < data.feature_names.size() ? data.feature_names[static_cast<std::size_t>(c)]
                                                                     : "x" + std::to_string(c))
        << ',';
  }
  out << "label\n";
  for (long r = 0; r < data.size(); ++r) {
    for (long c = 0; c < data.dim(); ++c) out << format_double(data.features(r, c)) << ',';
    out << data.labels[static_cast<std::size_t>(r)] << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());

  const std::filesystem::path sidecar = range_sidecar_path(path);
  if (data.feature_range) {
    std::ofstream rout(sidecar);
    if (!rout) throw IoError("cannot open " + sidecar.string() + " for writing");
    nlohmann::json doc{{"lower", vector_to_json(data.feature_range->lower)},
                       {"upper", vector_to_json(data.feature_range->upper)}};
    rout << doc.dump() << '\n';
  } else if (std::filesystem::exists(sidecar)) {
    std::filesystem::remove(sidecar);
  }
}

}  // namespace credo
