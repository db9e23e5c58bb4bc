#pragma once

#include <filesystem>

#include <json.hpp>

#include "credo/diffmodel.hpp"

namespace credo {

// Model documents:
//   {"kind": "linear" | "softmax_linear" | "mlp" | "rbf_kernel_machine" | "constant",
//    "input_dim": p, "output_dim": m,
//    "layers": [{"weights": [[...], ...] (row-major, out x in),
//                "bias": [...], "activation": "identity" | "softplus" | "tanh"}],
//    "centers", "coefficients", "bias", "bandwidth"   (rbf_kernel_machine)
//    "output"                                         (constant)}
// Doubles are written in shortest round-trip form, so a model re-loads
// bit-identically.
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& doc);

// {"kind": "cross_entropy" | "logistic_nll" | "hinge" | "squared_distance",
//  "num_classes": K, "smoothing": s (hinge), "anchors": [[...]] (squared_distance)}
nlohmann::json loss_to_json(const LossBundle& bundle);
LossBundle loss_from_json(const nlohmann::json& doc);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

nlohmann::json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const nlohmann::json& doc, const char* what);
nlohmann::json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const nlohmann::json& doc, const char* what);

}  // namespace credo
