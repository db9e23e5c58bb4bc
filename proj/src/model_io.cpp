#include "credo/model_io.hpp"

#include <fstream>
#include <sstream>

#include "credo/error.hpp"

namespace credo {

using nlohmann::json;

namespace {

const json& field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw IoError(std::string("missing field \"") + key + "\"");
  }
  return doc.at(key);
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "softplus") return Activation::kSoftplus;
  if (s == "tanh") return Activation::kTanh;
  throw IoError("unknown activation \"" + s + "\"");
}

std::vector<DenseLayer> layers_from_json(const json& doc) {
  const json& arr = field(doc, "layers");
  if (!arr.is_array()) throw IoError("\"layers\" must be an array");
  std::vector<DenseLayer> layers;
  for (const json& l : arr) {
    DenseLayer layer;
    layer.weights = matrix_from_json(field(l, "weights"), "weights");
    layer.bias = vector_from_json(field(l, "bias"), "bias");
    layer.activation = l.contains("activation")
                           ? activation_from_string(l.at("activation").get<std::string>())
                           : Activation::kIdentity;
    layers.push_back(std::move(layer));
  }
  if (layers.empty()) throw IoError("\"layers\" is empty");
  return layers;
}

void check_declared_dims(const Model& m, const json& doc) {
  if (doc.contains("input_dim") && doc.at("input_dim").get<long>() != m.input_dim()) {
    throw DimensionError("declared input_dim", m.input_dim(), doc.at("input_dim").get<long>());
  }
  if (doc.contains("output_dim") && doc.at("output_dim").get<long>() != m.output_dim()) {
    throw DimensionError("declared output_dim", m.output_dim(), doc.at("output_dim").get<long>());
  }
}

}  // namespace

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vector_from_json(const json& doc, const char* what) {
  if (!doc.is_array()) throw IoError(std::string(what) + " must be an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw IoError(std::string(what) + " must contain only numbers");
    v[static_cast<Eigen::Index>(i)] = doc[i].get<double>();
  }
  return v;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
  return rows;
}

MatrixXd matrix_from_json(const json& doc, const char* what) {
  if (!doc.is_array() || doc.empty()) {
    throw IoError(std::string(what) + " must be a non-empty 2-D array");
  }
  const std::size_t cols = doc[0].is_array() ? doc[0].size() : 0;
  MatrixXd m(static_cast<Eigen::Index>(doc.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const VectorXd row = vector_from_json(doc[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) {
      throw IoError(std::string(what) + " rows have inconsistent lengths");
    }
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

json model_to_json(const Model& model) {
  json doc;
  doc["kind"] = std::string(to_string(model.kind()));
  doc["input_dim"] = model.input_dim();
  doc["output_dim"] = model.output_dim();
  switch (model.kind()) {
    case ModelKind::kLinear:
    case ModelKind::kSoftmaxLinear:
    case ModelKind::kMlp: {
      json layers = json::array();
      for (const DenseLayer& l : model.layers()) {
        layers.push_back({{"weights", matrix_to_json(l.weights)},
                          {"bias", vector_to_json(l.bias)},
                          {"activation", std::string(to_string(l.activation))}});
      }
      doc["layers"] = std::move(layers);
      break;
    }
    case ModelKind::kRbfKernelMachine:
      doc["centers"] = matrix_to_json(model.rbf().centers);
      doc["coefficients"] = matrix_to_json(model.rbf().coefficients);
      doc["bias"] = vector_to_json(model.rbf().bias);
      doc["bandwidth"] = model.rbf().bandwidth;
      break;
    case ModelKind::kConstant:
      doc["output"] = vector_to_json(model.constant_output());
      break;
  }
  return doc;
}

Model model_from_json(const json& doc) {
  const std::string kind = field(doc, "kind").get<std::string>();
  Model model = [&] {
    if (kind == "linear" || kind == "softmax_linear") {
      std::vector<DenseLayer> layers = layers_from_json(doc);
      if (layers.size() != 1) throw IoError(kind + " model must have exactly one layer");
      if (layers[0].activation != Activation::kIdentity) {
        throw IoError(kind + " layer must use the identity activation");
      }
      return kind == "linear"
                 ? Model::Linear(std::move(layers[0].weights), std::move(layers[0].bias))
                 : Model::SoftmaxLinear(std::move(layers[0].weights), std::move(layers[0].bias));
    }
    if (kind == "mlp") return Model::Mlp(layers_from_json(doc));
    if (kind == "rbf_kernel_machine") {
      RbfParams p;
      p.centers = matrix_from_json(field(doc, "centers"), "centers");
      p.coefficients = matrix_from_json(field(doc, "coefficients"), "coefficients");
      p.bias = vector_from_json(field(doc, "bias"), "bias");
      p.bandwidth = field(doc, "bandwidth").get<double>();
      return Model::RbfKernelMachine(std::move(p));
    }
    if (kind == "constant") {
      return Model::Constant(field(doc, "input_dim").get<int>(),
                             vector_from_json(field(doc, "output"), "output"));
    }
    throw IoError("unknown model kind \"" + kind + "\"");
  }();
  check_declared_dims(model, doc);
  return model;
}

json loss_to_json(const LossBundle& bundle) {
  json doc;
  doc["kind"] = std::string(to_string(bundle.kind()));
  doc["num_classes"] = bundle.num_classes();
  if (bundle.kind() == LossKind::kHinge) doc["smoothing"] = bundle.smoothing();
  if (bundle.kind() == LossKind::kSquaredDistance) doc["anchors"] = matrix_to_json(bundle.anchors());
  return doc;
}

LossBundle loss_from_json(const json& doc) {
  const std::string kind = field(doc, "kind").get<std::string>();
  if (kind == "squared_distance") {
    LossBundle b = LossBundle::SquaredDistance(matrix_from_json(field(doc, "anchors"), "anchors"));
    if (doc.contains("num_classes") && doc.at("num_classes").get<int>() != b.num_classes()) {
      throw DimensionError("declared num_classes", b.num_classes(), doc.at("num_classes").get<int>());
    }
    return b;
  }
  if (kind != "cross_entropy" && kind != "logistic_nll" && kind != "hinge") {
    throw IoError("unknown loss kind \"" + kind + "\"");
  }
  const int k = field(doc, "num_classes").get<int>();
  if (kind == "cross_entropy") return LossBundle::CrossEntropy(k);
  if (kind == "logistic_nll") return LossBundle::LogisticNll(k);
  return LossBundle::Hinge(k, doc.value("smoothing", 0.1));
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    return model_from_json(doc);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace credo
