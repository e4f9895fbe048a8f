#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tfinfer/disorder.hpp"

namespace tfinfer {

// Local basis: index 0 is spin up (sigma^z = +1), index 1 is spin down.

/// Operator-valued matrix of one MPO site, stored sparsely.
struct MpoSite {
  struct Entry {
    int left;   ///< incoming bond state
    int right;  ///< outgoing bond state
    Eigen::Matrix2d op;
  };
  int left_dim = 0;
  int right_dim = 0;
  std::vector<Entry> entries;
};

/// Matrix-product operator for an open chain. The left boundary selects bond
/// state 0 and the right boundary selects bond state `right_dim - 1`.
struct Mpo {
  std::vector<MpoSite> sites;
  int n_sites() const { return static_cast<int>(sites.size()); }
  int max_bond_dim() const;
};

/// Noisy ladder Hamiltonian with transverse field as an MPO of bond dimension 5,
/// independent of N. Bond states: 0 = nothing placed, 1 = Z placed for a
/// three-body term, 2 = Z placed for a two-body term, 3 = waiting for the
/// closing Z, 4 = complete.
Mpo build_mpo(const LadderInstance& inst, double field);

/// Dense 2^N x 2^N contraction in the exact-solver basis (site i = bit i).
/// Intended for N <= 12.
Eigen::MatrixXd mpo_to_dense(const Mpo& mpo);

/// Open-boundary MPS. Site i holds two matrices (one per physical state) of
/// shape D_i x D_{i+1}, with D_0 = D_N = 1.
class MatrixProductState {
 public:
  using SiteTensor = std::array<Eigen::MatrixXd, 2>;

  MatrixProductState() = default;
  MatrixProductState(std::vector<SiteTensor> sites, int max_bond, int center);

  /// Normalized product state; each site is cos(a) |up> + sin(a) |down>.
  static MatrixProductState product_state(std::span<const double> angles, int max_bond);
  /// Product state with angles drawn uniformly from (0, pi/2] using `seed`.
  static MatrixProductState random_product_state(int n_sites, int max_bond, std::uint64_t seed);

  int n_sites() const { return static_cast<int>(sites_.size()); }
  int max_bond() const { return max_bond_; }
  int center() const { return center_; }
  const SiteTensor& site(int i) const { return sites_[static_cast<std::size_t>(i)]; }
  SiteTensor& site(int i) { return sites_[static_cast<std::size_t>(i)]; }
  void set_center(int c) { center_ = c; }
  int bond_dim(int bond) const;  ///< dimension between site bond-1 and bond

  double norm() const;
  /// Largest deviation from the identity of sum_s A^T A (sites left of the
  /// center) and sum_s B B^T (sites right of it).
  double isometry_defect() const;
  std::vector<double> to_dense() const;

 private:
  std::vector<SiteTensor> sites_;
  int max_bond_ = 0;
  int center_ = 0;
};

double mps_expectation(const MatrixProductState& mps, const Mpo& mpo);
double mps_magnetization_z(const MatrixProductState& mps, int site);
std::vector<double> mps_magnetizations_z(const MatrixProductState& mps);

struct AnnealSchedule {
  enum class Interpolation { Geometric, Linear };

  double field_start = 10.0;
  double field_target = 0.0;
  int n_steps = 8;
  Interpolation interpolation = Interpolation::Geometric;

  /// max(10, 4 * target), 8 geometric steps.
  static AnnealSchedule defaults(double field_target);
  void validate() const;
  /// Fields visited in order; the last entry is always field_target. A
  /// geometric schedule that ends at zero descends to field_start * 1e-3 and
  /// then takes a final step to 0.
  std::vector<double> fields() const;
};

struct DmrgOptions {
  int chi = 64;
  int max_sweeps = 30;        ///< per annealing stage
  double energy_tol = 1e-10;  ///< per-sweep energy change that ends a stage
  double svd_cutoff = 1e-12;  ///< singular values below cutoff * s_max are dropped
  double local_tol = 1e-11;   ///< residual tolerance of the two-site eigensolver
  AnnealSchedule schedule;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;  ///< empty: no checkpointing
};

struct DmrgStage {
  double field = 0.0;
  int sweeps = 0;
  double energy = 0.0;
  double max_truncation = 0.0;            ///< largest discarded weight seen
  std::vector<double> half_sweep_energies;
};

struct DmrgResult {
  MatrixProductState mps;
  double energy = 0.0;
  std::vector<DmrgStage> stages;
  int resumed_stages = 0;  ///< stages skipped because a checkpoint covered them
};

/// Two-site DMRG annealed through options.schedule; the state converged at
/// each field warm-starts the next. Throws ConvergenceError naming the stage
/// and its last two sweep energies if a stage does not settle.
DmrgResult dmrg_ground_state(const LadderInstance& inst, const DmrgOptions& options);

struct MpsCheckpoint {
  int n_sites = 0;
  int chi = 0;
  double field = 0.0;
  std::uint64_t seed = 0;
  int completed_stages = 0;
  MatrixProductState mps;
};

void save_checkpoint(const MpsCheckpoint& checkpoint, const std::filesystem::path& path);
MpsCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tfinfer
