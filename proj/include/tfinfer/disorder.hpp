#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tfinfer {

/// One disorder realization of the triangular ladder: clean couplings for the
/// three-body terms s_i s_{i+1} s_{i+2} (j3) and two-body terms s_i s_{i+2}
/// (j2), plus the additive noise applied to each. All four arrays have
/// n_sites - 2 entries. Noisy couplings are always derived, never stored.
struct LadderInstance {
  int n_sites = 0;
  double sigma = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> j3;
  std::vector<double> j2;
  std::vector<double> xi3;
  std::vector<double> xi2;

  std::size_t n_terms() const { return j3.size(); }
  std::vector<double> noisy_j3() const;
  std::vector<double> noisy_j2() const;

  bool operator==(const LadderInstance&) const = default;
};

/// Draws j3, j2 ~ N(1, sigma^2) and xi3, xi2 ~ N(0, gamma^2), in that order,
/// from a single stream seeded with `seed`.
LadderInstance generate_instance(int n_sites, double sigma, double gamma, std::uint64_t seed);

/// Throws InvalidSize / Dimension / Domain when the invariants do not hold.
void validate(const LadderInstance& inst);

std::string instance_to_json(const LadderInstance& inst);
LadderInstance instance_from_json(const std::string& text);

void save_instance(const LadderInstance& inst, const std::filesystem::path& path);
LadderInstance load_instance(const std::filesystem::path& path);

}  // namespace tfinfer
