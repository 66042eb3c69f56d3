#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <random>

namespace bcca {

// splitmix64, used to fan a single seed out into independent sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic stream of sub-seeds; restart i always receives the i-th value
// regardless of what happened to earlier restarts.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_); }

 private:
  std::uint64_t state_;
};

// FNV-1a over explicit little-endian byte sequences. Used to derive benchmark
// cell seeds from (base_seed, grid coordinates, repetition) so that adding
// grid points never perturbs existing cells. Unlike std::hash this is stable
// across runs and platforms.
class StableHash {
 public:
  StableHash& mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= static_cast<std::uint64_t>((v >> (8 * i)) & 0xFFu);
      h_ *= 0x100000001B3ull;
    }
    return *this;
  }
  StableHash& mix(std::int64_t v) { return mix(static_cast<std::uint64_t>(v)); }
  StableHash& mix(int v) { return mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  StableHash& mix(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    return mix(bits);
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ull;
};

// Fills a matrix with iid N(0, 1) draws in row-major order, so the draw
// sequence is part of the determinism contract.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sample_standard_normal(
    Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine) {
  std::normal_distribution<double> gauss;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = static_cast<Scalar>(gauss(engine));
  return out;
}

}  // namespace bcca
