#pragma once

// Small synthetic datasets and a full-batch MLP trainer, used to produce
// fixtures for the command-line tools and the acceptance suite.

#include <cstdint>
#include <vector>

#include "credo/dataset.hpp"
#include "credo/diffmodel.hpp"

namespace credo {

// `classes` isotropic Gaussian blobs in the plane with means evenly spaced on
// a circle of the given radius.
Dataset gaussian_mixture(int classes, int per_class, double radius, double spread,
                         std::uint64_t seed);

// 8x8 grey-level glyphs in [0, 1]: one fixed stroke template per class
// (up to 10), randomly shifted by at most one pixel, with additive Gaussian
// noise clipped to the unit box. The dataset carries the [0, 1] range.
Dataset glyph_images(int classes, int per_class, double noise, std::uint64_t seed);

struct TrainConfig {
  std::vector<int> hidden = {16};
  Activation activation = Activation::kSoftplus;
  int epochs = 500;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

// Cross-entropy MLP on logits trained with full-batch Adam.
Model train_mlp(const Dataset& data, int num_classes, const TrainConfig& cfg);

// Mean cross-entropy over the dataset.
double mean_cross_entropy(const Model& model, const Dataset& data);

// Fraction of samples whose argmax logit equals the label.
double accuracy(const Model& model, const Dataset& data);

}  // namespace credo
