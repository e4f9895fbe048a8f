#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tfinfer/overlap.hpp"

namespace tfinfer {

/// Replica-symmetric, static-approximation mean-field theory of the SK model:
/// an original system (variance sigma^2, inverse temperature beta0) and a noisy
/// copy (variance sigma^2 + gamma^2, inverse temperature beta, transverse field).
struct MeanFieldParams {
  double sigma = 0.5;
  double gamma = 0.75;
  double j0 = 1.0;
  double beta0 = 30.0;
  double beta = 30.0;
  double field = 0.0;

  double noisy_sd() const;  ///< sqrt(sigma^2 + gamma^2)
  void validate() const;
};

/// Nodes and weights for integrals against the standard normal density. The
/// weights include the density, so they sum to ~1. Node i and node n-1-i are
/// mirror images whenever the rule is centred at zero.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Probabilists' Gauss-Hermite rule by the Golub-Welsch eigenvalue method.
GaussRule gauss_hermite_rule(int n);

/// Composite 8-point Gauss-Legendre in u with z = center + width * sinh(u),
/// covering |z| <= cutoff. Nodes cluster within ~width of `center`, where the
/// mean-field integrands change sign at large beta. `n` must be a multiple of 16.
GaussRule stretched_legendre_rule(int n, double center, double width, double cutoff = 9.0);

struct QuadratureSpec {
  enum class Kind { StretchedLegendre, GaussHermite };
  Kind kind = Kind::StretchedLegendre;
  int n_nodes_outer = 1024;  ///< z and z0
  int n_nodes_inner = 512;   ///< y
  bool log_space = true;     ///< inner integrals always use log-sum-exp; kept for the record

  void validate() const;
};

double phi0(double z0, const MeanFieldParams& p, double q0, double m0);
double phi(double z, double y, const MeanFieldParams& p, double q, double m, double r);
double psi(double phi_value, const MeanFieldParams& p);

struct OriginalRhs {
  double m0 = 0.0;
  double q0 = 0.0;
  double log_partition = 0.0;  ///< int Dz0 ln 2 cosh Phi0
};

struct NoisyRhs {
  double m = 0.0;
  double q = 0.0;
  double r = 0.0;
  double log_partition = 0.0;  ///< int Dz ln int Dy 2 cosh Psi
  double replicon = 0.0;       ///< s^2 beta^2 int Dz (d mu / dA)^2; RS is unstable above 1
};

/// Right-hand sides of the self-consistent equations at the given order parameters.
OriginalRhs original_rhs(const MeanFieldParams& p, const QuadratureSpec& quad, double m0, double q0);
NoisyRhs noisy_rhs(const MeanFieldParams& p, const QuadratureSpec& quad, double m, double q, double r);

struct OriginalSolution {
  double m0 = 0.0;
  double q0 = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct NoisySolution {
  double m = 0.0;
  double q = 0.0;
  double r = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  int projections = 0;     ///< times r < q was repaired during the iteration
  double replicon = 0.0;
  double free_energy = 0.0; ///< noisy-branch part of -[f]
};

struct MeanFieldSolution {
  double m0 = 0.0, q0 = 0.0, m = 0.0, q = 0.0, r = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SolveOptions {
  double tol_original = 1e-12;
  double tol_noisy = 1e-11;
  int max_iterations = 4000;  ///< right-hand-side evaluations per candidate
  double damping = 0.5;
  bool paramagnetic_candidates = true;  ///< also try the m = 0, q > 0 start when no magnetized root exists
};

/// Damped fixed-point iteration accelerated by Newton steps. Starts are tried
/// in order: the warm start (if magnetized) and (0.9, 0.9); then the glass
/// start (0, 0.9); then (0, 0). The first class that converges is kept: a
/// magnetized root with the largest -[f], else the glass root with the
/// smallest -[f] (replica limit), else the paramagnet. Roots whose m or q
/// collapse are snapped to zero and re-polished in that subspace.
OriginalSolution solve_original(const MeanFieldParams& p, const QuadratureSpec& quad, const SolveOptions& options = {},
                                const OriginalSolution* warm = nullptr);

/// As solve_original for (m, q, r) with starts (0.9, 0.9, 0.95), (0, 0.9, 0.95)
/// and (0, 0, 0). The paramagnet start r = 0 picks the small-r root of the r
/// equation rather than the frozen root near 1.
NoisySolution solve_noisy(const MeanFieldParams& p, const QuadratureSpec& quad, const SolveOptions& options = {},
                          const NoisySolution* warm = nullptr);

MeanFieldSolution combine(const OriginalSolution& original, const NoisySolution& noisy);

/// -[f], the negative free energy per spin times the inverse temperatures.
double free_energy(const MeanFieldParams& p, const QuadratureSpec& quad, double m0, double q0, double m, double q,
                   double r);
double free_energy(const MeanFieldParams& p, const QuadratureSpec& quad, const MeanFieldSolution& s);

struct MeanFieldOverlap {
  double original_factor = 0.0;  ///< int Dz0 sgn Phi0
  double noisy_factor = 0.0;     ///< int Dz sgn(int Dy sinh Psi Phi / Psi^2)
  double overlap = 0.0;          ///< product of the two
  /// Probit of the noisy factor, noisy_factor = erf(noisy_margin). Same
  /// ordering as the overlap but does not saturate at 1 in floating point.
  double noisy_margin = 0.0;
};

/// Refuses (ErrorCode::Convergence) unless the solution is converged.
MeanFieldOverlap overlap_mf(const MeanFieldParams& p, const QuadratureSpec& quad, const MeanFieldSolution& s);

struct MfPoint {
  double gamma_noise = 0.0;
  double field = 0.0;
  MeanFieldSolution solution;
  MeanFieldOverlap overlap;
  double replicon = 0.0;
  bool rsb_warning = false;
};

struct MfSweep {
  MeanFieldParams params;  ///< field is ignored
  std::vector<MfPoint> points;
  int failed = 0;
};

/// Sweeps the field in grid order, warm-starting each point from the previous
/// converged one. Rows at or below the largest field with replicon > 1 (or
/// with r < q repairs) carry rsb_warning.
MfSweep sweep_field_mf(const MeanFieldParams& params, std::span<const double> fields, const QuadratureSpec& quad,
                       const SolveOptions& options = {});

struct MfGammaOpt {
  double gamma_noise = 0.0;
  GammaOpt opt;
  int failed = 0;
  MfSweep sweep;
};

/// Gamma_opt for each noise level. The optimum is located on the noisy
/// margin, which orders points exactly as the overlap does. Rows run in
/// parallel across `workers` threads.
std::vector<MfGammaOpt> find_gamma_opt_mf(const MeanFieldParams& params, std::span<const double> gammas,
                                          std::span<const double> fields, const QuadratureSpec& quad,
                                          const SolveOptions& options = {}, int workers = 1);

void write_mf_csv(std::span<const MfPoint> points, const std::filesystem::path& path);

}  // namespace tfinfer
