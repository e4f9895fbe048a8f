#include "tfinfer/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tfinfer/error.hpp"

namespace tfinfer {

namespace {

EigenPair dense_lowest(const SymmetricOperator& op, Eigen::Index dim) {
  Eigen::MatrixXd dense(dim, dim);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    unit[c] = 1.0;
    op(unit, dense.col(c));
    unit[c] = 0.0;
  }
  dense = 0.5 * (dense + dense.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  EigenPair out;
  out.value = solver.eigenvalues()[0];
  out.vector = solver.eigenvectors().col(0);
  out.gap_estimate = dim > 1 ? solver.eigenvalues()[1] - solver.eigenvalues()[0]
                             : std::numeric_limits<double>::infinity();
  out.residual = (dense * out.vector - out.value * out.vector).norm();
  out.matvecs = static_cast<int>(dim);
  return out;
}

// Classical Gram-Schmidt against the first `count` columns of basis, with a
// second pass whenever the first one cancelled most of w (DGKS criterion).
// Returns the accumulated projection coefficients.
Eigen::VectorXd orthogonalize(const Eigen::MatrixXd& basis, Eigen::Index count, Eigen::VectorXd& w) {
  auto active = basis.leftCols(count);
  const double before = w.norm();
  Eigen::VectorXd h = active.transpose() * w;
  w.noalias() -= active * h;
  if (w.norm() < 0.7071 * before) {
    const Eigen::VectorXd h2 = active.transpose() * w;
    w.noalias() -= active * h2;
    h += h2;
  }
  return h;
}

}  // namespace

EigenPair lowest_eigenpair(const SymmetricOperator& op, Eigen::Index dim, const Eigen::VectorXd& start,
                           const KrylovOptions& options) {
  if (dim <= 0) fail(ErrorCode::InvalidSize, "eigensolver dimension must be positive");
  if (start.size() != dim) fail(ErrorCode::Dimension, "start vector has the wrong dimension");
  if (dim <= options.dense_threshold) return dense_lowest(op, dim);

  const Eigen::Index m = std::min<Eigen::Index>(std::max(options.subspace, 4), dim);
  const Eigen::Index keep = std::clamp<Eigen::Index>(options.keep, 1, m - 2);

  Eigen::MatrixXd basis(dim, m + 1);
  Eigen::MatrixXd projected = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd w(dim);

  const double start_norm = start.norm();
  if (!(start_norm > 0.0) || !std::isfinite(start_norm)) fail(ErrorCode::InvalidArgument, "start vector must be nonzero");
  basis.col(0) = start / start_norm;

  Eigen::Index kept = 0;
  int matvecs = 0;
  double last_residual = std::numeric_limits<double>::infinity();
  Eigen::VectorXd ritz_vector(dim);

  while (true) {
    double beta = 0.0;
    Eigen::Index j = kept;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small;
    for (; j < m; ++j) {
      if (matvecs >= options.max_matvecs) {
        std::ostringstream msg;
        msg << "Lanczos did not converge within " << options.max_matvecs << " operator applications (last residual "
            << last_residual << ")";
        throw ConvergenceError(msg.str(), last_residual);
      }
      op(basis.col(j), w);
      ++matvecs;
      const Eigen::VectorXd h = orthogonalize(basis, j + 1, w);
      projected.col(j).head(j + 1) = h;
      projected.row(j).head(j + 1) = h.transpose();
      beta = w.norm();

      small.compute(projected.topLeftCorner(j + 1, j + 1));
      const double estimate = std::abs(beta * small.eigenvectors()(j, 0));
      const bool breakdown = beta <= 1e-14 * std::max(1.0, std::abs(small.eigenvalues()[0]));

      if (estimate <= options.tol || breakdown) {
        ritz_vector.noalias() = basis.leftCols(j + 1) * small.eigenvectors().col(0);
        ritz_vector.normalize();
        Eigen::VectorXd applied(dim);
        op(ritz_vector, applied);
        ++matvecs;
        const double value = ritz_vector.dot(applied);
        last_residual = (applied - value * ritz_vector).norm();
        if (last_residual <= options.tol) {
          EigenPair out;
          out.value = value;
          out.vector = ritz_vector;
          out.residual = last_residual;
          out.gap_estimate = j >= 1 ? small.eigenvalues()[1] - small.eigenvalues()[0]
                                    : std::numeric_limits<double>::infinity();
          out.matvecs = matvecs;
          return out;
        }
        if (breakdown) {
          // Invariant subspace that misses the target: restart from the Ritz vector.
          basis.col(0) = ritz_vector;
          projected.setZero();
          kept = 0;
          j = -1;
          break;
        }
      }
      last_residual = estimate;
      basis.col(j + 1) = w / beta;
      if (j + 1 < m) {
        projected(j + 1, j) = beta;
        projected(j, j + 1) = beta;
      }
    }
    if (j < 0) continue;

    // Thick restart: keep the lowest Ritz vectors plus the residual direction.
    small.compute(projected);
    const Eigen::MatrixXd rotation = small.eigenvectors().leftCols(keep);
    Eigen::MatrixXd restarted = basis.leftCols(m) * rotation;
    basis.leftCols(keep) = restarted;
    basis.col(keep) = basis.col(m);
    projected.setZero();
    for (Eigen::Index i = 0; i < keep; ++i) projected(i, i) = small.eigenvalues()[i];
    kept = keep;
  }
}

}  // namespace tfinfer
