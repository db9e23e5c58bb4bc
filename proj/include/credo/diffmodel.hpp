#pragma once

// Differentiable models φ: R^p -> R^m and per-class losses ℓ_k: R^m -> R_+.
//
// Everything here is a pure function of immutable values. A Model or
// LossBundle may be shared across threads without synchronization.

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace credo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { kIdentity, kSoftplus, kTanh };

struct DenseLayer {
  MatrixXd weights;  // out x in
  VectorXd bias;     // out
  Activation activation = Activation::kIdentity;
};

enum class ModelKind { kLinear, kSoftmaxLinear, kMlp, kRbfKernelMachine, kConstant };

// Gaussian kernel expansion z = Σ_j coefficients.row(j) k(x, centers.row(j)) + bias,
// k(x, μ) = exp(-|x - μ|² / (2 bandwidth²)).
struct RbfParams {
  MatrixXd centers;       // n x p
  MatrixXd coefficients;  // n x m
  VectorXd bias;          // m
  double bandwidth = 1.0;
};

class Model;

// Forward pass with the intermediate values needed for reverse mode.
class Linearization {
 public:
  const VectorXd& output() const { return output_; }
  // Returns J(x)^T cotangent, J the Jacobian of the model at x.
  VectorXd pullback(const VectorXd& cotangent) const;

 private:
  friend class Model;
  const Model* model_ = nullptr;
  VectorXd input_;
  std::vector<VectorXd> layer_inputs_;  // input of each dense layer
  std::vector<VectorXd> pre_activations_;
  std::vector<double> kernel_values_;
  VectorXd output_;
};

class Model {
 public:
  static Model Linear(MatrixXd weights, VectorXd bias);
  // softmax(W x + b): outputs probabilities rather than logits.
  static Model SoftmaxLinear(MatrixXd weights, VectorXd bias);
  static Model Mlp(std::vector<DenseLayer> layers);
  static Model RbfKernelMachine(RbfParams params);
  static Model Constant(int input_dim, VectorXd output);

  ModelKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const RbfParams& rbf() const { return rbf_; }
  const VectorXd& constant_output() const { return constant_; }

  VectorXd forward(const VectorXd& x) const;
  // The returned object references *this; keep the model alive while using it.
  Linearization linearize(const VectorXd& x) const;

 private:
  Model() = default;
  void check_input(const VectorXd& x) const;
  friend class Linearization;

  ModelKind kind_ = ModelKind::kConstant;
  int input_dim_ = 0;
  int output_dim_ = 0;
  std::vector<DenseLayer> layers_;
  RbfParams rbf_;
  VectorXd constant_;
};

enum class LossKind { kCrossEntropy, kLogisticNll, kHinge, kSquaredDistance };

// Per-class losses. Logistic and hinge losses act on a scalar score when the
// model output is one-dimensional and there are two classes (class 0 is the
// positive class); otherwise they are one-vs-rest on z_k.
class LossBundle {
 public:
  static LossBundle CrossEntropy(int num_classes);
  static LossBundle LogisticNll(int num_classes);
  static LossBundle Hinge(int num_classes, double smoothing = 0.1);
  // ℓ_k(z) = |z - anchors.row(k)|²; one row per class.
  static LossBundle SquaredDistance(MatrixXd anchors);

  LossKind kind() const { return kind_; }
  int num_classes() const { return num_classes_; }
  double smoothing() const { return smoothing_; }
  const MatrixXd& anchors() const { return anchors_; }

  // Throws DimensionError if this bundle cannot consume outputs of size m.
  void check_output_dim(long m) const;

  double value(const VectorXd& z, int k) const;
  VectorXd values(const VectorXd& z) const;
  // ∇_z ℓ_k(z).
  VectorXd gradient(const VectorXd& z, int k) const;
  // Σ_k weights_k ∇_z ℓ_k(z).
  VectorXd weighted_gradient(const VectorXd& z, const VectorXd& weights) const;

 private:
  LossBundle() = default;
  void check_args(const VectorXd& z, int k) const;

  LossKind kind_ = LossKind::kCrossEntropy;
  int num_classes_ = 0;
  double smoothing_ = 0.1;
  MatrixXd anchors_;
};

// Largest cross-entropy value: the probability is clamped at 1e-300.
inline constexpr double kMaxCrossEntropy = 690.77552789821368;

VectorXd forward(const Model& model, const VectorXd& x);
double loss(const LossBundle& bundle, const VectorXd& z, int k);
// ∇_x ℓ_k(φ(x)), computed in reverse mode.
VectorXd input_gradient(const Model& model, const LossBundle& bundle,
                        const VectorXd& x, int k);
// c°_k = -ℓ_k(φ(x°)).
VectorXd credence_at_origin(const Model& model, const LossBundle& bundle,
                            const VectorXd& x0);

// Losses and a λ-weighted input gradient from a single forward/backward pass.
struct LossEvaluation {
  VectorXd losses;         // ℓ_k(φ(x))
  VectorXd weighted_grad;  // Σ_k weights_k ∇_x ℓ_k(φ(x))
};
LossEvaluation evaluate_losses(const Model& model, const LossBundle& bundle,
                               const VectorXd& x, const VectorXd& weights);

// Normalized exp(-ℓ(φ(x))). Equals the softmax output for cross-entropy on
// logits and (σ(z), σ(-z)) for the binary logistic loss.
VectorXd class_probabilities(const Model& model, const LossBundle& bundle,
                             const VectorXd& x);

// True when every ℓ_k∘φ is convex: affine (or constant) models with any of the
// convex losses provided here.
bool is_convex_pair(const Model& model, const LossBundle& bundle);

double softplus(double u);
double sigmoid(double u);
VectorXd softmax(const VectorXd& z);
double log_sum_exp(const VectorXd& z);

std::string_view to_string(ModelKind kind);
std::string_view to_string(LossKind kind);
std::string_view to_string(Activation activation);

}  // namespace credo
