#include "tfinfer/ladder_classical.hpp"

#include <array>
#include <limits>
#include <string>

#include "tfinfer/error.hpp"

namespace tfinfer {

SpinConfiguration::SpinConfiguration(std::vector<std::int8_t> spins) : spins_(std::move(spins)) {
  for (auto s : spins_)
    if (s != 1 && s != -1) fail(ErrorCode::Domain, "spin values must be +1 or -1");
}

SpinConfiguration SpinConfiguration::negated() const {
  SpinConfiguration out = *this;
  for (auto& s : out.spins_) s = static_cast<std::int8_t>(-s);
  return out;
}

namespace {

std::size_t checked_sites(std::span<const double> j3, std::span<const double> j2) {
  if (j3.size() != j2.size())
    fail(ErrorCode::Dimension, "j3 and j2 must have equal length (" + std::to_string(j3.size()) + " vs " +
                                   std::to_string(j2.size()) + ")");
  if (j3.empty()) fail(ErrorCode::InvalidSize, "ladder needs at least 3 sites (one coupling term)");
  return j3.size() + 2;
}

// Pair state index: bit 1 = first spin is down, bit 0 = second spin is down.
// Index order 0..3 therefore enumerates (+,+), (+,-), (-,+), (-,-).
constexpr int spin_of(int bit) { return bit ? -1 : 1; }

}  // namespace

double classical_energy(const SpinConfiguration& config, std::span<const double> j3, std::span<const double> j2) {
  const std::size_t n = checked_sites(j3, j2);
  if (config.size() != n)
    fail(ErrorCode::Dimension, "configuration has " + std::to_string(config.size()) + " spins, couplings need " +
                                   std::to_string(n));
  double energy = 0.0;
  for (std::size_t i = 0; i + 2 < n; ++i)
    energy += ladder_term_energy(j3[i], j2[i], config[i], config[i + 1], config[i + 2]);
  return energy;
}

ClassicalGroundState viterbi_ground_state(std::span<const double> j3, std::span<const double> j2) {
  const std::size_t n = checked_sites(j3, j2);
  const std::size_t terms = n - 2;

  std::array<double, 4> cost{0.0, 0.0, 0.0, 0.0};
  // back[i][state] = first spin bit of the predecessor pair for term i.
  std::vector<std::array<std::uint8_t, 4>> back(terms);

  for (std::size_t i = 0; i < terms; ++i) {
    std::array<double, 4> next{};
    for (int state = 0; state < 4; ++state) {
      const int b = (state >> 1) & 1;
      const int c = state & 1;
      double best = std::numeric_limits<double>::infinity();
      std::uint8_t arg = 0;
      for (int a = 0; a < 2; ++a) {
        const double candidate =
            cost[(a << 1) | b] + ladder_term_energy(j3[i], j2[i], spin_of(a), spin_of(b), spin_of(c));
        if (candidate < best) {
          best = candidate;
          arg = static_cast<std::uint8_t>(a);
        }
      }
      next[state] = best;
      back[i][state] = arg;
    }
    cost = next;
  }

  int state = 0;
  for (int s = 1; s < 4; ++s)
    if (cost[s] < cost[state]) state = s;

  std::vector<std::int8_t> spins(n);
  spins[n - 2] = static_cast<std::int8_t>(spin_of((state >> 1) & 1));
  spins[n - 1] = static_cast<std::int8_t>(spin_of(state & 1));
  for (std::size_t i = terms; i-- > 0;) {
    const int a = back[i][state];
    spins[i] = static_cast<std::int8_t>(spin_of(a));
    state = (a << 1) | ((state >> 1) & 1);
  }

  ClassicalGroundState result{SpinConfiguration(std::move(spins)), 0.0};
  result.energy = classical_energy(result.config, j3, j2);
  return result;
}

ClassicalGroundState brute_force_ground_state(std::span<const double> j3, std::span<const double> j2) {
  const std::size_t n = checked_sites(j3, j2);
  if (n > static_cast<std::size_t>(kBruteForceMaxSites))
    fail(ErrorCode::SizeLimit, "brute force is limited to N <= 24, got N = " + std::to_string(n));

  // Site 0 is the most significant bit, so increasing index is lexicographic
  // order with +1 (bit 0) before -1 (bit 1).
  const std::uint64_t count = std::uint64_t{1} << n;
  std::vector<int> s(n);
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t best_index = 0;
  for (std::uint64_t index = 0; index < count; ++index) {
    for (std::size_t k = 0; k < n; ++k) s[k] = ((index >> (n - 1 - k)) & 1) ? -1 : 1;
    double energy = 0.0;
    for (std::size_t i = 0; i + 2 < n; ++i) energy += ladder_term_energy(j3[i], j2[i], s[i], s[i + 1], s[i + 2]);
    if (energy < best) {
      best = energy;
      best_index = index;
    }
  }

  std::vector<std::int8_t> spins(n);
  for (std::size_t k = 0; k < n; ++k) spins[k] = ((best_index >> (n - 1 - k)) & 1) ? -1 : 1;
  return {SpinConfiguration(std::move(spins)), best};
}

}  // namespace tfinfer
