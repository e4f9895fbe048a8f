#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace tfinfer {

/// y = A x for a real symmetric operator of fixed dimension.
using SymmetricOperator = std::function<void(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y)>;

struct KrylovOptions {
  double tol = 1e-10;       ///< required ||A v - lambda v|| for a unit v
  int max_matvecs = 20000;
  int subspace = 40;        ///< Krylov basis size before a thick restart
  int keep = 10;            ///< Ritz vectors retained across a restart
  int dense_threshold = 64; ///< dimensions at or below this are diagonalized densely
};

struct EigenPair {
  double value = 0.0;
  Eigen::VectorXd vector;
  double residual = 0.0;      ///< explicit ||A v - value v||
  double gap_estimate = 0.0;  ///< second Ritz value minus the first (+inf if unavailable)
  int matvecs = 0;
};

/// Lowest eigenpair of a symmetric operator by thick-restart Lanczos with full
/// (two-pass) reorthogonalization. `start` must be nonzero; it is normalized
/// internally. Throws ConvergenceError once max_matvecs is exhausted.
EigenPair lowest_eigenpair(const SymmetricOperator& op, Eigen::Index dim, const Eigen::VectorXd& start,
                           const KrylovOptions& options);

}  // namespace tfinfer
