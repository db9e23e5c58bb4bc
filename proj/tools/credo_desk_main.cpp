// Writes a synthetic dataset and a trained MLP for it:
//
//   credo-desk mixture --out DIR [--classes 3] [--per-class 100] ...
//   credo-desk glyphs  --out DIR [--classes 10] [--per-class 30] ...
//
// DIR receives train.csv, test.csv (with range sidecars for glyphs) and
// model.json.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "credo/desk.hpp"
#include "credo/error.hpp"
#include "credo/model_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale fixtures: synthetic data and a trained MLP"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out = ".";
  std::uint64_t seed = 0;
  int classes = 0;
  int per_class = 0;
  double spread = 0.6;
  double radius = 2.0;
  double noise = 0.2;
  credo::TrainConfig train;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--seed", seed, "Seed for data and weight initialization");
  app.add_option("--classes", classes, "Number of classes");
  app.add_option("--per-class", per_class, "Training samples per class");
  app.add_option("--hidden", train.hidden, "Hidden layer widths");
  app.add_option("--epochs", train.epochs, "Full-batch Adam epochs");
  app.add_option("--learning-rate", train.learning_rate, "Adam step size");
  app.add_option("--weight-decay", train.weight_decay, "L2 penalty on weights");
  auto* mixture = app.add_subcommand("mixture", "Gaussian blobs on a circle in the plane");
  mixture->add_option("--spread", spread, "Blob standard deviation");
  mixture->add_option("--radius", radius, "Circle radius");
  auto* glyphs = app.add_subcommand("glyphs", "8x8 noisy glyph images in [0, 1]");
  glyphs->add_option("--noise", noise, "Pixel noise standard deviation");
  CLI11_PARSE(app, argc, argv);

  try {
    const bool is_mixture = mixture->parsed();
    if (classes == 0) classes = is_mixture ? 3 : 10;
    if (per_class == 0) per_class = is_mixture ? 100 : 30;
    train.seed = seed;
    auto make = [&](int n, std::uint64_t s) {
      return is_mixture ? credo::gaussian_mixture(classes, n, radius, spread, s)
                        : credo::glyph_images(classes, n, noise, s);
    };
    const credo::Dataset train_set = make(per_class, seed);
    const credo::Dataset test_set = make(std::max(1, per_class / 2), seed + 1);
    const credo::Model model = credo::train_mlp(train_set, classes, train);

    const std::filesystem::path dir(out);
    std::filesystem::create_directories(dir);
    credo::save_dataset(train_set, dir / "train.csv");
    credo::save_dataset(test_set, dir / "test.csv");
    credo::save_model(model, dir / "model.json");
    std::cout << "train accuracy " << credo::accuracy(model, train_set) << ", test accuracy "
              << credo::accuracy(model, test_set) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
