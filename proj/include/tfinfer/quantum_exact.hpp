#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tfinfer/disorder.hpp"
#include "tfinfer/ladder_classical.hpp"

namespace tfinfer {

// Basis convention: bit i of a basis index is 1 when site i points down
// (sigma^z_i = -1). Site 0 is the least significant bit.

inline constexpr int kExactMaxSites = 24;

/// Dense ground-state amplitudes in the z basis. The Hamiltonian is real
/// symmetric, so a real ground vector always exists.
struct QuantumState {
  int n_sites = 0;
  std::vector<double> amplitudes;
};

/// Classical ladder energy of every basis state for the given couplings.
std::vector<double> ladder_diagonal(std::span<const double> j3, std::span<const double> j2);

/// out = (D - field * sum_i sigma^x_i) v for diagonal D of length 2^n.
/// Works for any n >= 1, which is what the single-spin checks rely on.
void apply_transverse_ising(std::span<const double> diagonal, double field, std::span<const double> v,
                            std::span<double> out);

/// Matrix-free application of the noisy ladder Hamiltonian with transverse field.
std::vector<double> apply_hamiltonian(const LadderInstance& inst, double field, std::span<const double> v);

struct LanczosOptions {
  double tol = 1e-10;
  int max_iter = 20000;  ///< cap on Hamiltonian applications
  std::uint64_t seed = 0;
};

struct QuantumGroundState {
  QuantumState state;
  double energy = 0.0;
  double residual = 0.0;
  double gap_estimate = 0.0;
  bool near_degenerate = false;  ///< gap estimate below 1e-10
  int matvecs = 0;
};

inline constexpr double kDegenerateGap = 1e-10;

/// Lowest eigenpair of the noisy Hamiltonian. With field == 0 the operator is
/// diagonal and the exact minimizing basis vector is returned directly. A
/// nonempty `start` replaces the seeded random start vector (warm start).
QuantumGroundState ground_state_lanczos(const LadderInstance& inst, double field, const LanczosOptions& options,
                                        std::span<const double> start = {});

double magnetization_z(const QuantumState& state, int site);
std::vector<double> magnetizations_z(const QuantumState& state);

/// sum_i <sigma^x_i>.
double total_transverse_magnetization(const QuantumState& state);

/// Basis index of a classical configuration.
std::uint64_t basis_index(const SpinConfiguration& config);

struct InferredConfiguration {
  SpinConfiguration config;
  std::vector<bool> flagged;  ///< |<sigma^z_i>| below kFlagThreshold
  std::size_t flagged_count() const;
};

inline constexpr double kFlagThreshold = 1e-10;

/// S_i = sign(<sigma^z_i>) with sign(0) := +1.
InferredConfiguration inferred_configuration(std::span<const double> magnetizations);
InferredConfiguration inferred_configuration(const QuantumState& state);

}  // namespace tfinfer
