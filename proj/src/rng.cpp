#include "credo/rng.hpp"

#include <cmath>
#include <numbers>

namespace credo {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream_id,
                       std::string_view purpose)
    : key_(splitmix64(seed + kGolden) ^
           splitmix64(splitmix64(stream_id + 2 * kGolden) ^ fnv1a(purpose))) {}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return splitmix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double CounterRng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd CounterRng::on_sphere(const Eigen::VectorXd& center,
                                      double radius) {
  Eigen::VectorXd dir(center.size());
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = normal();
    norm = dir.norm();
  } while (norm == 0.0);
  return center + (radius / norm) * dir;
}

Eigen::VectorXd CounterRng::in_ball(const Eigen::VectorXd& center,
                                    double radius) {
  const double scale =
      std::pow(uniform(), 1.0 / static_cast<double>(center.size()));
  return on_sphere(center, radius * scale);
}

}  // namespace credo
