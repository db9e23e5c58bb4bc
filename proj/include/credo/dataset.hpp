#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "credo/diffmodel.hpp"
#include "credo/solver.hpp"

namespace credo {

// n samples of dimension p with class labels. On disk: CSV with a header row,
// one column named "label" and every other column a feature, plus an optional
// sidecar "<file>.range.json" holding {"lower": [...], "upper": [...]}.
struct Dataset {
  MatrixXd features;  // n x p
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::optional<Box> feature_range;

  long size() const { return features.rows(); }
  long dim() const { return features.cols(); }
  VectorXd sample(long i) const { return features.row(i).transpose(); }

  // n >= 1, labels in [0, num_classes), consistent sizes, finite values.
  void validate(int num_classes) const;
};

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
std::filesystem::path range_sidecar_path(const std::filesystem::path& dataset_path);

// printf("%.17g"): enough digits to re-read every double exactly.
std::string format_double(double v);

}  // namespace credo
