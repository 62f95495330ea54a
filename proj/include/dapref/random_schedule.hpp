#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace dapref {

/// Stateless hash-based generator. Every draw is a pure function of
/// (key, stream, counter, lane), so any draw can be produced out of order.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter,
                     std::uint64_t lane = 0) const noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter,
                 std::uint64_t lane = 0) const noexcept;

  /// Standard normal via Box-Muller on lanes (2j, 2j+1).
  double normal(std::uint64_t stream, std::uint64_t counter,
                std::uint64_t lane = 0) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

private:
  std::uint64_t key_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

/// Pre-committed proposal innovations and per-stage uniforms, indexed by
/// absolute iteration number. Safe to query from several threads.
class RandomnessSchedule {
public:
  RandomnessSchedule(std::uint64_t seed, int dimension, int stages);

  double uniform(std::int64_t t, int stage) const;
  Eigen::VectorXd innovation(std::int64_t t) const;
  void innovation(std::int64_t t, std::span<double> out) const;

  std::uint64_t seed() const noexcept { return seed_; }
  int dimension() const noexcept { return dimension_; }
  int stages() const noexcept { return stages_; }

private:
  std::uint64_t seed_;
  int dimension_;
  int stages_;
  CounterRng rng_;
};

RandomnessSchedule make_schedule(std::uint64_t seed, int dimension, int stages);

} // namespace dapref
