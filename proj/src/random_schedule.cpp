#include "dapref/random_schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dapref {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kUniformStream = 0x5545u;
constexpr std::uint64_t kInnovationStream = 0x494eu;

} // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
  // SplitMix64 finalizer
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t stream, std::uint64_t counter,
                               std::uint64_t lane) const noexcept {
  std::uint64_t h = mix64(key_);
  h = mix64(h ^ stream);
  h = mix64(h ^ counter);
  h = mix64(h ^ (lane * kGolden));
  return h;
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t counter,
                           std::uint64_t lane) const noexcept {
  const std::uint64_t top = bits(stream, counter, lane) >> 11;
  return (static_cast<double>(top) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t counter,
                          std::uint64_t lane) const noexcept {
  const std::uint64_t pair = lane / 2;
  const double u1 = uniform(stream, counter, 2 * pair);
  const double u2 = uniform(stream, counter, 2 * pair + 1);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (lane % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
}

RandomnessSchedule::RandomnessSchedule(std::uint64_t seed, int dimension, int stages)
    : seed_(seed), dimension_(dimension), stages_(stages), rng_(seed) {
  if (dimension < 1) throw std::invalid_argument("schedule dimension must be >= 1");
  if (stages < 1) throw std::invalid_argument("schedule stages must be >= 1");
}

double RandomnessSchedule::uniform(std::int64_t t, int stage) const {
  if (stage < 0 || stage >= stages_) {
    throw std::out_of_range("uniform stage " + std::to_string(stage) +
                            " outside schedule capacity " + std::to_string(stages_));
  }
  return rng_.uniform(kUniformStream, static_cast<std::uint64_t>(t),
                      static_cast<std::uint64_t>(stage));
}

void RandomnessSchedule::innovation(std::int64_t t, std::span<double> out) const {
  if (out.size() != static_cast<std::size_t>(dimension_)) {
    throw std::invalid_argument("innovation buffer has wrong dimension");
  }
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = rng_.normal(kInnovationStream, static_cast<std::uint64_t>(t), j);
  }
}

Eigen::VectorXd RandomnessSchedule::innovation(std::int64_t t) const {
  Eigen::VectorXd z(dimension_);
  innovation(t, std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
  return z;
}

RandomnessSchedule make_schedule(std::uint64_t seed, int dimension, int stages) {
  return RandomnessSchedule(seed, dimension, stages);
}

} // namespace dapref
