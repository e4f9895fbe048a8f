#include "tfinfer/quantum_exact.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tfinfer/error.hpp"
#include "tfinfer/krylov.hpp"
#include "tfinfer/rng.hpp"

namespace tfinfer {

namespace {

void check_sites(int n) {
  if (n < 3) fail(ErrorCode::InvalidSize, "ladder needs at least 3 sites");
  if (n > kExactMaxSites)
    fail(ErrorCode::SizeLimit, "dense state vectors are limited to N <= 24, got N = " + std::to_string(n));
}

}  // namespace

std::vector<double> ladder_diagonal(std::span<const double> j3, std::span<const double> j2) {
  if (j3.size() != j2.size()) fail(ErrorCode::Dimension, "j3 and j2 must have equal length");
  const int n = static_cast<int>(j3.size()) + 2;
  check_sites(n);
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> diag(dim);
  for (std::size_t b = 0; b < dim; ++b) {
    double energy = 0.0;
    for (int i = 0; i + 2 < n; ++i) {
      const int a = (b >> i) & 1 ? -1 : 1;
      const int m = (b >> (i + 1)) & 1 ? -1 : 1;
      const int c = (b >> (i + 2)) & 1 ? -1 : 1;
      energy += ladder_term_energy(j3[i], j2[i], a, m, c);
    }
    diag[b] = energy;
  }
  return diag;
}

void apply_transverse_ising(std::span<const double> diagonal, double field, std::span<const double> v,
                            std::span<double> out) {
  const std::size_t dim = diagonal.size();
  if (dim < 2 || (dim & (dim - 1)) != 0) fail(ErrorCode::Dimension, "diagonal length must be a power of two >= 2");
  if (v.size() != dim || out.size() != dim) fail(ErrorCode::Dimension, "vector length must equal 2^N");
  for (std::size_t b = 0; b < dim; ++b) out[b] = diagonal[b] * v[b];
  if (field == 0.0) return;
  for (std::size_t stride = 1; stride < dim; stride <<= 1) {
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
      double* lo = out.data() + base;
      double* hi = lo + stride;
      const double* vlo = v.data() + base;
      const double* vhi = vlo + stride;
      for (std::size_t k = 0; k < stride; ++k) {
        lo[k] -= field * vhi[k];
        hi[k] -= field * vlo[k];
      }
    }
  }
}

std::vector<double> apply_hamiltonian(const LadderInstance& inst, double field, std::span<const double> v) {
  validate(inst);
  check_sites(inst.n_sites);
  const auto j3 = inst.noisy_j3();
  const auto j2 = inst.noisy_j2();
  const auto diag = ladder_diagonal(j3, j2);
  if (v.size() != diag.size())
    fail(ErrorCode::Dimension, "vector length " + std::to_string(v.size()) + " does not match 2^N = " +
                                   std::to_string(diag.size()));
  std::vector<double> out(diag.size());
  apply_transverse_ising(diag, field, v, out);
  return out;
}

QuantumGroundState ground_state_lanczos(const LadderInstance& inst, double field, const LanczosOptions& options,
                                        std::span<const double> start) {
  validate(inst);
  check_sites(inst.n_sites);
  if (!(options.tol > 0.0)) fail(ErrorCode::InvalidArgument, "Lanczos tolerance must be positive");
  if (!(field >= 0.0) || !std::isfinite(field)) fail(ErrorCode::Domain, "transverse field must be finite and >= 0");

  const auto diag = ladder_diagonal(inst.noisy_j3(), inst.noisy_j2());
  const std::size_t dim = diag.size();

  QuantumGroundState out;
  out.state.n_sites = inst.n_sites;

  if (field == 0.0) {
    const auto best = static_cast<std::size_t>(std::min_element(diag.begin(), diag.end()) - diag.begin());
    out.state.amplitudes.assign(dim, 0.0);
    out.state.amplitudes[best] = 1.0;
    out.energy = diag[best];
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < dim; ++b)
      if (b != best) second = std::min(second, diag[b]);
    out.gap_estimate = second - diag[best];
    out.near_degenerate = out.gap_estimate < kDegenerateGap;
    return out;
  }

  Eigen::VectorXd initial(static_cast<Eigen::Index>(dim));
  if (!start.empty()) {
    if (start.size() != dim) fail(ErrorCode::Dimension, "warm-start vector has the wrong length");
    for (std::size_t b = 0; b < dim; ++b) initial[static_cast<Eigen::Index>(b)] = start[b];
  } else {
    GaussianStream rng(options.seed);
    for (Eigen::Index b = 0; b < initial.size(); ++b) initial[b] = rng.uniform_open0();
  }

  SymmetricOperator op = [&](const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y) {
    apply_transverse_ising(diag, field, std::span<const double>(x.data(), dim), std::span<double>(y.data(), dim));
  };
  KrylovOptions kopt;
  kopt.tol = options.tol;
  kopt.max_matvecs = options.max_iter;
  const EigenPair pair = lowest_eigenpair(op, static_cast<Eigen::Index>(dim), initial, kopt);

  out.state.amplitudes.assign(pair.vector.data(), pair.vector.data() + dim);
  // Fix the overall sign so that the largest-magnitude amplitude is positive.
  Eigen::Index peak = 0;
  pair.vector.cwiseAbs().maxCoeff(&peak);
  if (pair.vector[peak] < 0.0)
    for (auto& a : out.state.amplitudes) a = -a;
  out.energy = pair.value;
  out.residual = pair.residual;
  out.gap_estimate = pair.gap_estimate;
  out.near_degenerate = pair.gap_estimate < kDegenerateGap;
  out.matvecs = pair.matvecs;
  return out;
}

double magnetization_z(const QuantumState& state, int site) {
  if (site < 0 || site >= state.n_sites)
    fail(ErrorCode::InvalidArgument, "site " + std::to_string(site) + " out of range");
  if (state.amplitudes.size() != (std::size_t{1} << state.n_sites))
    fail(ErrorCode::Dimension, "state vector length does not match 2^N");
  double up = 0.0;
  double down = 0.0;
  for (std::size_t b = 0; b < state.amplitudes.size(); ++b) {
    const double p = state.amplitudes[b] * state.amplitudes[b];
    ((b >> site) & 1 ? down : up) += p;
  }
  return std::clamp(up - down, -1.0, 1.0);
}

std::vector<double> magnetizations_z(const QuantumState& state) {
  std::vector<double> out(static_cast<std::size_t>(state.n_sites));
  for (int i = 0; i < state.n_sites; ++i) out[static_cast<std::size_t>(i)] = magnetization_z(state, i);
  return out;
}

double total_transverse_magnetization(const QuantumState& state) {
  const auto& a = state.amplitudes;
  double total = 0.0;
  for (int i = 0; i < state.n_sites; ++i) {
    const std::size_t mask = std::size_t{1} << i;
    for (std::size_t b = 0; b < a.size(); ++b) total += a[b] * a[b ^ mask];
  }
  return total;
}

std::uint64_t basis_index(const SpinConfiguration& config) {
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < config.size(); ++i)
    if (config[i] < 0) index |= std::uint64_t{1} << i;
  return index;
}

std::size_t InferredConfiguration::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true));
}

InferredConfiguration inferred_configuration(std::span<const double> magnetizations) {
  std::vector<std::int8_t> spins(magnetizations.size());
  std::vector<bool> flagged(magnetizations.size());
  for (std::size_t i = 0; i < magnetizations.size(); ++i) {
    spins[i] = magnetizations[i] < 0.0 ? -1 : 1;
    flagged[i] = std::abs(magnetizations[i]) < kFlagThreshold;
  }
  return {SpinConfiguration(std::move(spins)), std::move(flagged)};
}

InferredConfiguration inferred_configuration(const QuantumState& state) {
  return inferred_configuration(magnetizations_z(state));
}

}  // namespace tfinfer
