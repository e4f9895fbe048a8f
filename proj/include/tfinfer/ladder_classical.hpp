#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tfinfer {

/// Ising configuration, one +1/-1 entry per site.
class SpinConfiguration {
 public:
  SpinConfiguration() = default;
  explicit SpinConfiguration(std::vector<std::int8_t> spins);
  static SpinConfiguration all_up(std::size_t n) { return SpinConfiguration(std::vector<std::int8_t>(n, 1)); }

  std::size_t size() const { return spins_.size(); }
  int operator[](std::size_t i) const { return spins_[i]; }
  void flip(std::size_t i) { spins_[i] = static_cast<std::int8_t>(-spins_[i]); }
  std::span<const std::int8_t> values() const { return spins_; }
  SpinConfiguration negated() const;

  bool operator==(const SpinConfiguration&) const = default;

 private:
  std::vector<std::int8_t> spins_;
};

struct ClassicalGroundState {
  SpinConfiguration config;
  double energy = 0.0;
};

/// -sum_i ( j3[i] s_i s_{i+1} s_{i+2} + j2[i] s_i s_{i+2} ), summed left to right.
double classical_energy(const SpinConfiguration& config, std::span<const double> j3, std::span<const double> j2);

/// Energy of term i for spins (a, b, c) at sites (i, i+1, i+2).
inline double ladder_term_energy(double j3, double j2, int a, int b, int c) {
  return -(j3 * (a * b * c) + j2 * (a * c));
}

/// Zero-temperature transfer matrix over the pair state (s_i, s_{i+1}).
/// Ties prefer +1: a candidate with -1 must be strictly lower to win.
ClassicalGroundState viterbi_ground_state(std::span<const double> j3, std::span<const double> j2);

/// Exhaustive search over all 2^N states (N <= 24). Ties keep the
/// lexicographically first configuration with +1 ordered before -1.
ClassicalGroundState brute_force_ground_state(std::span<const double> j3, std::span<const double> j2);

inline constexpr int kBruteForceMaxSites = 24;

}  // namespace tfinfer
