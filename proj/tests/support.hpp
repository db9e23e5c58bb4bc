#pragma once

// Hand-rolled generators and helpers shared by the unit tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "credo/diffmodel.hpp"
#include "credo/rng.hpp"

namespace credo::testing {

inline VectorXd random_vector(CounterRng& rng, long n, double scale = 1.0) {
  VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline MatrixXd random_matrix(CounterRng& rng, long rows, long cols, double scale = 1.0) {
  MatrixXd m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline int random_int(CounterRng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

inline Model random_mlp(CounterRng& rng, int p, int m, Activation act) {
  std::vector<DenseLayer> layers;
  const int hidden = random_int(rng, 2, 6);
  layers.push_back({random_matrix(rng, hidden, p, 0.8), random_vector(rng, hidden, 0.5), act});
  layers.push_back({random_matrix(rng, m, hidden, 0.8), random_vector(rng, m, 0.5), Activation::kIdentity});
  return Model::Mlp(std::move(layers));
}

// One model of the requested kind with p inputs and m outputs.
inline Model random_model(CounterRng& rng, ModelKind kind, int p, int m) {
  switch (kind) {
    case ModelKind::kLinear:
      return Model::Linear(random_matrix(rng, m, p), random_vector(rng, m));
    case ModelKind::kSoftmaxLinear:
      return Model::SoftmaxLinear(random_matrix(rng, m, p), random_vector(rng, m));
    case ModelKind::kMlp:
      return random_mlp(rng, p, m, rng.uniform() < 0.5 ? Activation::kSoftplus : Activation::kTanh);
    case ModelKind::kRbfKernelMachine: {
      const int n = random_int(rng, 2, 5);
      return Model::RbfKernelMachine(
          {random_matrix(rng, n, p), random_matrix(rng, n, m), random_vector(rng, m), 0.7 + rng.uniform()});
    }
    case ModelKind::kConstant:
      return Model::Constant(p, random_vector(rng, m));
  }
  return Model::Constant(p, VectorXd::Zero(m));
}

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::kLinear, ModelKind::kSoftmaxLinear, ModelKind::kMlp,
                                              ModelKind::kRbfKernelMachine, ModelKind::kConstant};
inline constexpr LossKind kAllLossKinds[] = {LossKind::kCrossEntropy, LossKind::kLogisticNll, LossKind::kHinge,
                                            LossKind::kSquaredDistance};

inline LossBundle make_bundle(CounterRng& rng, LossKind kind, int m) {
  switch (kind) {
    case LossKind::kCrossEntropy: return LossBundle::CrossEntropy(m);
    case LossKind::kLogisticNll: return LossBundle::LogisticNll(m);
    case LossKind::kHinge: return LossBundle::Hinge(m);
    case LossKind::kSquaredDistance: return LossBundle::SquaredDistance(random_matrix(rng, random_int(rng, 1, 3), m));
  }
  return LossBundle::CrossEntropy(m);
}

// Central differences of x -> ℓ_k(φ(x)).
inline VectorXd finite_difference_gradient(const Model& model, const LossBundle& bundle, const VectorXd& x,
                                           int k, double h = 1e-5) {
  VectorXd g(x.size());
  for (long i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (bundle.value(model.forward(a), k) - bundle.value(model.forward(b), k)) / (2.0 * h);
  }
  return g;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("credo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace credo::testing
