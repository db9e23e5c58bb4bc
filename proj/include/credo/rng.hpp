#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace credo {

// Counter-based generator. The stream is fully determined by
// (seed, stream_id, purpose); draw i is a pure function of the key and i, so
// per-sample streams never depend on scheduling order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id,
             std::string_view purpose);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal (Box-Muller, no cached second value).
  double normal();

  // Uniform point in the Euclidean ball of the given radius around center.
  Eigen::VectorXd in_ball(const Eigen::VectorXd& center, double radius);
  // Uniform point on the sphere of the given radius around center.
  Eigen::VectorXd on_sphere(const Eigen::VectorXd& center, double radius);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t z);

}  // namespace credo
