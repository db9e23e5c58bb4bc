#include "credo/desk.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "credo/error.hpp"
#include "credo/rng.hpp"

namespace credo {

namespace {

// Stroke templates, one row per pixel row, '#' = ink.
constexpr std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {"........", "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..", "........"},
    {"........", "...##...", "..###...", "...##...", "...##...", "...##...", "..####..", "........"},
    {"........", "..####..", ".#....#.", ".....#..", "...##...", "..#.....", ".######.", "........"},
    {"........", ".#####..", "......#.", "..####..", "......#.", "......#.", ".#####..", "........"},
    {"........", ".#...#..", ".#...#..", ".######.", ".....#..", ".....#..", ".....#..", "........"},
    {"........", ".######.", ".#......", ".#####..", "......#.", "......#.", ".#####..", "........"},
    {"........", "..####..", ".#......", ".#####..", ".#....#.", ".#....#.", "..####..", "........"},
    {"........", ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "........"},
    {"........", "..####..", ".#....#.", "..####..", ".#....#.", ".#....#.", "..####..", "........"},
    {"........", "..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "..####..", "........"},
}};

constexpr int kSide = 8;

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

struct AdamState {
  MatrixXd m_w, v_w;
  VectorXd m_b, v_b;
};

}  // namespace

Dataset gaussian_mixture(int classes, int per_class, double radius, double spread,
                         std::uint64_t seed) {
  if (classes < 2) throw DomainError("gaussian mixture needs at least two classes");
  if (per_class < 1) throw DomainError("per_class must be positive");
  if (!(spread > 0.0)) throw DomainError("spread must be positive");
  Dataset data;
  data.features.resize(static_cast<long>(classes) * per_class, 2);
  data.feature_names = {"x0", "x1"};
  CounterRng rng(seed, 0, "gaussian_mixture");
  long row = 0;
  for (int k = 0; k < classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / classes;
    for (int i = 0; i < per_class; ++i, ++row) {
      data.features(row, 0) = radius * std::cos(angle) + spread * rng.normal();
      data.features(row, 1) = radius * std::sin(angle) + spread * rng.normal();
      data.labels.push_back(k);
    }
  }
  return data;
}

Dataset glyph_images(int classes, int per_class, double noise, std::uint64_t seed) {
  if (classes < 2 || classes > static_cast<int>(kGlyphs.size())) {
    throw DomainError("glyph images support 2 to 10 classes");
  }
  if (per_class < 1) throw DomainError("per_class must be positive");
  if (!(noise >= 0.0)) throw DomainError("noise must be non-negative");
  constexpr int p = kSide * kSide;
  Dataset data;
  data.features.resize(static_cast<long>(classes) * per_class, p);
  for (int i = 0; i < p; ++i) data.feature_names.push_back("px" + std::to_string(i));
  data.feature_range = Box{VectorXd::Zero(p), VectorXd::Ones(p)};
  CounterRng rng(seed, 0, "glyph_images");
  long row = 0;
  for (int k = 0; k < classes; ++k) {
    for (int n = 0; n < per_class; ++n, ++row) {
      const int dr = static_cast<int>(std::floor(rng.uniform(-1.0, 2.0)));
      const int dc = static_cast<int>(std::floor(rng.uniform(-1.0, 2.0)));
      for (int r = 0; r < kSide; ++r) {
        for (int c = 0; c < kSide; ++c) {
          const int sr = r - dr;
          const int sc = c - dc;
          const bool ink = sr >= 0 && sr < kSide && sc >= 0 && sc < kSide &&
                           kGlyphs[static_cast<std::size_t>(k)][static_cast<std::size_t>(sr)][sc] == '#';
          const double v = (ink ? 1.0 : 0.0) + noise * rng.normal();
          data.features(row, r * kSide + c) = std::clamp(v, 0.0, 1.0);
        }
      }
      data.labels.push_back(k);
    }
  }
  return data;
}

Model train_mlp(const Dataset& data, int num_classes, const TrainConfig& cfg) {
  data.validate(num_classes);
  if (cfg.epochs < 0) throw DomainError("epochs must be non-negative");
  if (!(cfg.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  for (int h : cfg.hidden) {
    if (h < 1) throw DomainError("hidden layer widths must be positive");
  }

  std::vector<int> widths{static_cast<int>(data.dim())};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(num_classes);

  CounterRng rng(cfg.seed, 0, "mlp_init");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    const double scale = std::sqrt(2.0 / (widths[l] + widths[l + 1]));
    layer.weights = MatrixXd(widths[l + 1], widths[l]);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = scale * rng.normal();
    layer.bias = VectorXd::Zero(widths[l + 1]);
    layer.activation = l + 2 == widths.size() ? Activation::kIdentity : cfg.activation;
    layers.push_back(std::move(layer));
  }

  const long n = data.size();
  MatrixXd targets = MatrixXd::Zero(num_classes, n);
  for (long i = 0; i < n; ++i) targets(data.labels[static_cast<std::size_t>(i)], i) = 1.0;
  const MatrixXd inputs = data.features.transpose();  // p x n, one column per sample

  std::vector<AdamState> adam(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    adam[l].m_w = adam[l].v_w = MatrixXd::Zero(layers[l].weights.rows(), layers[l].weights.cols());
    adam[l].m_b = adam[l].v_b = VectorXd::Zero(layers[l].bias.size());
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  std::vector<MatrixXd> acts(layers.size() + 1);
  std::vector<MatrixXd> pre(layers.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    acts[0] = inputs;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      pre[l] = (layers[l].weights * acts[l]).colwise() + layers[l].bias;
      const Activation a = layers[l].activation;
      acts[l + 1] = pre[l].unaryExpr([a](double u) { return activate(a, u); });
    }
    MatrixXd delta(num_classes, n);
    for (long i = 0; i < n; ++i) delta.col(i) = softmax(acts.back().col(i)) - targets.col(i);
    delta /= static_cast<double>(n);

    const double bc1 = 1.0 - std::pow(kBeta1, epoch);
    const double bc2 = 1.0 - std::pow(kBeta2, epoch);
    for (std::size_t l = layers.size(); l-- > 0;) {
      const Activation a = layers[l].activation;
      delta = delta.cwiseProduct(pre[l].unaryExpr([a](double u) { return activate_derivative(a, u); }));
      const MatrixXd grad_w = delta * acts[l].transpose() + cfg.weight_decay * layers[l].weights;
      const VectorXd grad_b = delta.rowwise().sum();
      if (l > 0) delta = layers[l].weights.transpose() * delta;

      AdamState& s = adam[l];
      s.m_w = kBeta1 * s.m_w + (1.0 - kBeta1) * grad_w;
      s.v_w = kBeta2 * s.v_w + (1.0 - kBeta2) * grad_w.cwiseAbs2();
      s.m_b = kBeta1 * s.m_b + (1.0 - kBeta1) * grad_b;
      s.v_b = kBeta2 * s.v_b + (1.0 - kBeta2) * grad_b.cwiseAbs2();
      layers[l].weights -= cfg.learning_rate *
                           ((s.m_w / bc1).array() / ((s.v_w / bc2).array().sqrt() + kEps)).matrix();
      layers[l].bias -= cfg.learning_rate *
                        ((s.m_b / bc1).array() / ((s.v_b / bc2).array().sqrt() + kEps)).matrix();
    }
  }
  return Model::Mlp(std::move(layers));
}

double mean_cross_entropy(const Model& model, const Dataset& data) {
  const LossBundle ce = LossBundle::CrossEntropy(model.output_dim());
  double total = 0.0;
  for (long i = 0; i < data.size(); ++i) {
    total += ce.value(model.forward(data.sample(i)), data.labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(data.size());
}

double accuracy(const Model& model, const Dataset& data) {
  long correct = 0;
  for (long i = 0; i < data.size(); ++i) {
    Eigen::Index k = 0;
    model.forward(data.sample(i)).maxCoeff(&k);
    if (k == data.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace credo
