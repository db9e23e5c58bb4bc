#include "credo/diffmodel.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "credo/error.hpp"

namespace credo {

namespace {

void require_finite(const VectorXd& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
}

double activate(Activation a, double u) {
  switch (a) {
    case Activation::kIdentity: return u;
    case Activation::kSoftplus: return softplus(u);
    case Activation::kTanh: return std::tanh(u);
  }
  return u;
}

double activate_derivative(Activation a, double u) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kSoftplus: return sigmoid(u);
    case Activation::kTanh: {
      const double t = std::tanh(u);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void check_layer_chain(const std::vector<DenseLayer>& layers) {
  if (layers.empty()) throw DomainError("model needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0) {
      throw DomainError("layer " + std::to_string(i) + " has an empty weight matrix");
    }
    if (l.bias.size() != l.weights.rows()) {
      throw DimensionError("layer " + std::to_string(i) + " bias", l.weights.rows(),
                           l.bias.size());
    }
    if (i > 0 && l.weights.cols() != layers[i - 1].weights.rows()) {
      throw DimensionError("layer " + std::to_string(i) + " input",
                           layers[i - 1].weights.rows(), l.weights.cols());
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw DomainError("layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
}

}  // namespace

double softplus(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double log_sum_exp(const VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

VectorXd softmax(const VectorXd& z) {
  VectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

// ---------------------------------------------------------------------------
// Model

Model Model::Linear(MatrixXd weights, VectorXd bias) {
  Model m;
  m.kind_ = ModelKind::kLinear;
  m.layers_.push_back({std::move(weights), std::move(bias), Activation::kIdentity});
  check_layer_chain(m.layers_);
  m.input_dim_ = static_cast<int>(m.layers_.front().weights.cols());
  m.output_dim_ = static_cast<int>(m.layers_.front().weights.rows());
  return m;
}

Model Model::SoftmaxLinear(MatrixXd weights, VectorXd bias) {
  Model m = Linear(std::move(weights), std::move(bias));
  m.kind_ = ModelKind::kSoftmaxLinear;
  return m;
}

Model Model::Mlp(std::vector<DenseLayer> layers) {
  Model m;
  m.kind_ = ModelKind::kMlp;
  m.layers_ = std::move(layers);
  check_layer_chain(m.layers_);
  m.input_dim_ = static_cast<int>(m.layers_.front().weights.cols());
  m.output_dim_ = static_cast<int>(m.layers_.back().weights.rows());
  return m;
}

Model Model::RbfKernelMachine(RbfParams params) {
  if (params.centers.rows() == 0 || params.centers.cols() == 0) {
    throw DomainError("RBF model needs at least one center");
  }
  if (params.coefficients.rows() != params.centers.rows()) {
    throw DimensionError("RBF coefficient rows", params.centers.rows(),
                         params.coefficients.rows());
  }
  if (params.bias.size() != params.coefficients.cols()) {
    throw DimensionError("RBF bias", params.coefficients.cols(), params.bias.size());
  }
  if (!(params.bandwidth > 0.0) || !std::isfinite(params.bandwidth)) {
    throw DomainError("RBF bandwidth must be positive and finite");
  }
  if (!params.centers.allFinite() || !params.coefficients.allFinite() ||
      !params.bias.allFinite()) {
    throw DomainError("RBF model has non-finite parameters");
  }
  Model m;
  m.kind_ = ModelKind::kRbfKernelMachine;
  m.input_dim_ = static_cast<int>(params.centers.cols());
  m.output_dim_ = static_cast<int>(params.coefficients.cols());
  m.rbf_ = std::move(params);
  return m;
}

Model Model::Constant(int input_dim, VectorXd output) {
  if (input_dim <= 0) throw DomainError("input_dim must be positive");
  if (output.size() == 0) throw DomainError("constant output must be non-empty");
  require_finite(output, "constant output");
  Model m;
  m.kind_ = ModelKind::kConstant;
  m.input_dim_ = input_dim;
  m.output_dim_ = static_cast<int>(output.size());
  m.constant_ = std::move(output);
  return m;
}

void Model::check_input(const VectorXd& x) const {
  if (x.size() != input_dim_) throw DimensionError("model input", input_dim_, x.size());
  require_finite(x, "model input");
}

VectorXd Model::forward(const VectorXd& x) const { return linearize(x).output(); }

Linearization Model::linearize(const VectorXd& x) const {
  check_input(x);
  Linearization lin;
  lin.model_ = this;
  lin.input_ = x;
  switch (kind_) {
    case ModelKind::kConstant:
      lin.output_ = constant_;
      break;
    case ModelKind::kRbfKernelMachine: {
      const double inv = 1.0 / (2.0 * rbf_.bandwidth * rbf_.bandwidth);
      lin.kernel_values_.resize(static_cast<std::size_t>(rbf_.centers.rows()));
      VectorXd z = rbf_.bias;
      for (Eigen::Index j = 0; j < rbf_.centers.rows(); ++j) {
        const double kj = std::exp(-(x - rbf_.centers.row(j).transpose()).squaredNorm() * inv);
        lin.kernel_values_[static_cast<std::size_t>(j)] = kj;
        z.noalias() += kj * rbf_.coefficients.row(j).transpose();
      }
      lin.output_ = std::move(z);
      break;
    }
    case ModelKind::kLinear:
    case ModelKind::kSoftmaxLinear:
    case ModelKind::kMlp: {
      VectorXd h = x;
      for (const DenseLayer& layer : layers_) {
        VectorXd a = layer.weights * h + layer.bias;
        lin.layer_inputs_.push_back(std::move(h));
        h = a.unaryExpr([&](double u) { return activate(layer.activation, u); });
        lin.pre_activations_.push_back(std::move(a));
      }
      if (kind_ == ModelKind::kSoftmaxLinear) h = softmax(h);
      lin.output_ = std::move(h);
      break;
    }
  }
  return lin;
}

VectorXd Linearization::pullback(const VectorXd& cotangent) const {
  const Model& m = *model_;
  if (cotangent.size() != m.output_dim_) {
    throw DimensionError("pullback cotangent", m.output_dim_, cotangent.size());
  }
  switch (m.kind_) {
    case ModelKind::kConstant:
      return VectorXd::Zero(m.input_dim_);
    case ModelKind::kRbfKernelMachine: {
      const double inv_sq = 1.0 / (m.rbf_.bandwidth * m.rbf_.bandwidth);
      VectorXd g = VectorXd::Zero(m.input_dim_);
      for (Eigen::Index j = 0; j < m.rbf_.centers.rows(); ++j) {
        const double kj = kernel_values_[static_cast<std::size_t>(j)];
        const double s = m.rbf_.coefficients.row(j).dot(cotangent);
        g.noalias() -= (s * kj * inv_sq) * (input_ - m.rbf_.centers.row(j).transpose());
      }
      return g;
    }
    case ModelKind::kLinear:
    case ModelKind::kSoftmaxLinear:
    case ModelKind::kMlp: {
      VectorXd g = cotangent;
      if (m.kind_ == ModelKind::kSoftmaxLinear) {
        g = output_.cwiseProduct((g.array() - output_.dot(g)).matrix());
      }
      for (std::size_t i = m.layers_.size(); i-- > 0;) {
        const DenseLayer& layer = m.layers_[i];
        if (layer.activation != Activation::kIdentity) {
          g = g.cwiseProduct(pre_activations_[i].unaryExpr(
              [&](double u) { return activate_derivative(layer.activation, u); }));
        }
        g = layer.weights.transpose() * g;
      }
      return g;
    }
  }
  return VectorXd::Zero(m.input_dim_);
}

// ---------------------------------------------------------------------------
// LossBundle

LossBundle LossBundle::CrossEntropy(int num_classes) {
  if (num_classes < 1) throw DomainError("num_classes must be positive");
  LossBundle b;
  b.kind_ = LossKind::kCrossEntropy;
  b.num_classes_ = num_classes;
  return b;
}

LossBundle LossBundle::LogisticNll(int num_classes) {
  LossBundle b = CrossEntropy(num_classes);
  b.kind_ = LossKind::kLogisticNll;
  return b;
}

LossBundle LossBundle::Hinge(int num_classes, double smoothing) {
  if (!(smoothing > 0.0) || !std::isfinite(smoothing)) {
    throw DomainError("hinge smoothing must be positive and finite");
  }
  LossBundle b = CrossEntropy(num_classes);
  b.kind_ = LossKind::kHinge;
  b.smoothing_ = smoothing;
  return b;
}

LossBundle LossBundle::SquaredDistance(MatrixXd anchors) {
  if (anchors.rows() < 1 || anchors.cols() < 1) {
    throw DomainError("squared-distance loss needs a non-empty anchor matrix");
  }
  if (!anchors.allFinite()) throw DomainError("anchors have non-finite entries");
  LossBundle b;
  b.kind_ = LossKind::kSquaredDistance;
  b.num_classes_ = static_cast<int>(anchors.rows());
  b.anchors_ = std::move(anchors);
  return b;
}

void LossBundle::check_output_dim(long m) const {
  switch (kind_) {
    case LossKind::kCrossEntropy:
      if (m != num_classes_) throw DimensionError("cross-entropy logits", num_classes_, m);
      return;
    case LossKind::kLogisticNll:
    case LossKind::kHinge:
      if (m == 1 && num_classes_ == 2) return;
      if (m != num_classes_) throw DimensionError("one-vs-rest scores", num_classes_, m);
      return;
    case LossKind::kSquaredDistance:
      if (m != anchors_.cols()) throw DimensionError("squared-distance output", anchors_.cols(), m);
      return;
  }
}

void LossBundle::check_args(const VectorXd& z, int k) const {
  if (k < 0 || k >= num_classes_) {
    throw DomainError("class index " + std::to_string(k) + " out of range [0, " +
                      std::to_string(num_classes_) + ")");
  }
  check_output_dim(z.size());
  require_finite(z, "loss input");
}

double LossBundle::value(const VectorXd& z, int k) const {
  check_args(z, k);
  switch (kind_) {
    case LossKind::kCrossEntropy:
      return std::min(log_sum_exp(z) - z[k], kMaxCrossEntropy);
    case LossKind::kLogisticNll:
      if (z.size() == 1) return k == 0 ? softplus(-z[0]) : softplus(z[0]);
      return softplus(-z[k]);
    case LossKind::kHinge: {
      const double s = smoothing_;
      if (z.size() == 1) return s * softplus((1.0 + (k == 0 ? -z[0] : z[0])) / s);
      return s * softplus((1.0 - z[k]) / s);
    }
    case LossKind::kSquaredDistance:
      return (z - anchors_.row(k).transpose()).squaredNorm();
  }
  return 0.0;
}

VectorXd LossBundle::values(const VectorXd& z) const {
  VectorXd out(num_classes_);
  for (int k = 0; k < num_classes_; ++k) out[k] = value(z, k);
  return out;
}

VectorXd LossBundle::gradient(const VectorXd& z, int k) const {
  check_args(z, k);
  VectorXd g = VectorXd::Zero(z.size());
  switch (kind_) {
    case LossKind::kCrossEntropy:
      if (log_sum_exp(z) - z[k] >= kMaxCrossEntropy) return g;  // clamped region
      g = softmax(z);
      g[k] -= 1.0;
      return g;
    case LossKind::kLogisticNll:
      if (z.size() == 1) {
        g[0] = k == 0 ? -sigmoid(-z[0]) : sigmoid(z[0]);
      } else {
        g[k] = -sigmoid(-z[k]);
      }
      return g;
    case LossKind::kHinge: {
      const double s = smoothing_;
      if (z.size() == 1) {
        g[0] = k == 0 ? -sigmoid((1.0 - z[0]) / s) : sigmoid((1.0 + z[0]) / s);
      } else {
        g[k] = -sigmoid((1.0 - z[k]) / s);
      }
      return g;
    }
    case LossKind::kSquaredDistance:
      return 2.0 * (z - anchors_.row(k).transpose());
  }
  return g;
}

VectorXd LossBundle::weighted_gradient(const VectorXd& z, const VectorXd& weights) const {
  if (weights.size() != num_classes_) {
    throw DimensionError("loss weights", num_classes_, weights.size());
  }
  VectorXd g = VectorXd::Zero(z.size());
  for (int k = 0; k < num_classes_; ++k) {
    if (weights[k] != 0.0) g.noalias() += weights[k] * gradient(z, k);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Free operations

VectorXd forward(const Model& model, const VectorXd& x) { return model.forward(x); }

double loss(const LossBundle& bundle, const VectorXd& z, int k) { return bundle.value(z, k); }

VectorXd input_gradient(const Model& model, const LossBundle& bundle, const VectorXd& x,
                        int k) {
  const Linearization lin = model.linearize(x);
  return lin.pullback(bundle.gradient(lin.output(), k));
}

VectorXd credence_at_origin(const Model& model, const LossBundle& bundle, const VectorXd& x0) {
  return -bundle.values(model.forward(x0));
}

LossEvaluation evaluate_losses(const Model& model, const LossBundle& bundle, const VectorXd& x,
                               const VectorXd& weights) {
  const Linearization lin = model.linearize(x);
  LossEvaluation out;
  out.losses = bundle.values(lin.output());
  out.weighted_grad = lin.pullback(bundle.weighted_gradient(lin.output(), weights));
  return out;
}

VectorXd class_probabilities(const Model& model, const LossBundle& bundle, const VectorXd& x) {
  return softmax(-bundle.values(model.forward(x)));
}

bool is_convex_pair(const Model& model, const LossBundle&) {
  switch (model.kind()) {
    case ModelKind::kLinear:
    case ModelKind::kConstant:
      return true;
    case ModelKind::kMlp:
      return std::all_of(model.layers().begin(), model.layers().end(),
                         [](const DenseLayer& l) { return l.activation == Activation::kIdentity; });
    case ModelKind::kSoftmaxLinear:
    case ModelKind::kRbfKernelMachine:
      return false;
  }
  return false;
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kSoftmaxLinear: return "softmax_linear";
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kRbfKernelMachine: return "rbf_kernel_machine";
    case ModelKind::kConstant: return "constant";
  }
  return "unknown";
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kLogisticNll: return "logistic_nll";
    case LossKind::kHinge: return "hinge";
    case LossKind::kSquaredDistance: return "squared_distance";
  }
  return "unknown";
}

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kIdentity: return "identity";
    case Activation::kSoftplus: return "softplus";
    case Activation::kTanh: return "tanh";
  }
  return "unknown";
}

}  // namespace credo
