#include "tfinfer/mps_dmrg.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "tfinfer/error.hpp"
#include "tfinfer/krylov.hpp"
#include "tfinfer/rng.hpp"

namespace tfinfer {

namespace {

using Matrix = Eigen::MatrixXd;
using SiteTensor = MatrixProductState::SiteTensor;

constexpr int kMpoDim = 5;
constexpr int kStart = 0;
constexpr int kOpen3 = 1;
constexpr int kOpen2 = 2;
constexpr int kWait = 3;
constexpr int kDone = 4;

Eigen::Matrix2d pauli_z() { return Eigen::Vector2d(1.0, -1.0).asDiagonal(); }
Eigen::Matrix2d pauli_x() {
  Eigen::Matrix2d x;
  x << 0.0, 1.0, 1.0, 0.0;
  return x;
}

// One MPO bond index per entry; an empty matrix stands for a zero block.
using Environment = std::array<Matrix, kMpoDim>;

bool active(const Matrix& m) { return m.size() > 0; }

void accumulate(Matrix& target, double coeff, const Matrix& term) {
  if (!active(target))
    target = coeff * term;
  else
    target.noalias() += coeff * term;
}

Environment left_boundary() {
  Environment env;
  env[kStart] = Matrix::Ones(1, 1);
  return env;
}

Environment right_boundary() {
  Environment env;
  env[kDone] = Matrix::Ones(1, 1);
  return env;
}

// L'[b] = sum op_ab(t, s) A[t]^T L[a] A[s]
Environment extend_left(const Environment& env, const SiteTensor& a, const MpoSite& w) {
  std::array<std::array<Matrix, 2>, kMpoDim> la;
  std::array<std::array<Matrix, 2>, kMpoDim> acc;
  for (const auto& e : w.entries) {
    if (!active(env[e.left])) continue;
    for (int s = 0; s < 2; ++s) {
      for (int t = 0; t < 2; ++t) {
        const double c = e.op(t, s);
        if (c == 0.0) continue;
        if (!active(la[e.left][s])) la[e.left][s] = env[e.left] * a[s];
        accumulate(acc[e.right][t], c, la[e.left][s]);
      }
    }
  }
  Environment out;
  for (int b = 0; b < kMpoDim; ++b)
    for (int t = 0; t < 2; ++t)
      if (active(acc[b][t])) accumulate(out[b], 1.0, a[t].transpose() * acc[b][t]);
  return out;
}

// R'[a] = sum op_ab(t, s) B[t] R[b] B[s]^T
Environment extend_right(const Environment& env, const SiteTensor& bt, const MpoSite& w) {
  std::array<std::array<Matrix, 2>, kMpoDim> rb;
  std::array<std::array<Matrix, 2>, kMpoDim> acc;
  for (const auto& e : w.entries) {
    if (!active(env[e.right])) continue;
    for (int s = 0; s < 2; ++s) {
      for (int t = 0; t < 2; ++t) {
        const double c = e.op(t, s);
        if (c == 0.0) continue;
        if (!active(rb[e.right][s])) rb[e.right][s] = env[e.right] * bt[s].transpose();
        accumulate(acc[e.left][t], c, rb[e.right][s]);
      }
    }
  }
  Environment out;
  for (int a = 0; a < kMpoDim; ++a)
    for (int t = 0; t < 2; ++t)
      if (active(acc[a][t])) accumulate(out[a], 1.0, bt[t] * acc[a][t]);
  return out;
}

// Two-site effective Hamiltonian. Vectors hold four Dl x Dr column-major
// blocks ordered (s1, s2) = (0,0), (0,1), (1,0), (1,1).
class TwoSiteOperator {
 public:
  TwoSiteOperator(const Environment& left, const MpoSite& w1, const MpoSite& w2, const Environment& right,
                  Eigen::Index dl, Eigen::Index dr)
      : left_(left), w1_(w1), w2_(w2), right_(right), dl_(dl), dr_(dr) {}

  Eigen::Index dim() const { return 4 * dl_ * dr_; }

  void operator()(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y) const {
    const Eigen::Index block = dl_ * dr_;
    auto in = [&](int s1, int s2) { return Eigen::Map<const Matrix>(x.data() + (2 * s1 + s2) * block, dl_, dr_); };

    // X[b][t1][s2] = sum_{a, s1} W1_ab(t1, s1) L[a] T[s1][s2]
    std::array<std::array<Matrix, 4>, kMpoDim> lt;
    std::array<std::array<Matrix, 4>, kMpoDim> xs;
    for (const auto& e : w1_.entries) {
      if (!active(left_[e.left])) continue;
      for (int s1 = 0; s1 < 2; ++s1) {
        for (int t1 = 0; t1 < 2; ++t1) {
          const double c = e.op(t1, s1);
          if (c == 0.0) continue;
          for (int s2 = 0; s2 < 2; ++s2) {
            Matrix& cached = lt[e.left][2 * s1 + s2];
            if (!active(cached)) cached = left_[e.left] * in(s1, s2);
            accumulate(xs[e.right][2 * t1 + s2], c, cached);
          }
        }
      }
    }

    // Z[c][t1][t2] = sum_{b, s2} W2_bc(t2, s2) X[b][t1][s2]; Y = sum_c Z R[c]^T
    std::array<std::array<Matrix, 4>, kMpoDim> zs;
    for (const auto& e : w2_.entries) {
      if (!active(right_[e.right])) continue;
      for (int s2 = 0; s2 < 2; ++s2) {
        for (int t2 = 0; t2 < 2; ++t2) {
          const double c = e.op(t2, s2);
          if (c == 0.0) continue;
          for (int t1 = 0; t1 < 2; ++t1) {
            const Matrix& xm = xs[e.left][2 * t1 + s2];
            if (active(xm)) accumulate(zs[e.right][2 * t1 + t2], c, xm);
          }
        }
      }
    }

    y.setZero();
    for (int c = 0; c < kMpoDim; ++c) {
      if (!active(right_[c])) continue;
      for (int k = 0; k < 4; ++k) {
        if (!active(zs[c][k])) continue;
        Eigen::Map<Matrix> out(y.data() + k * block, dl_, dr_);
        out.noalias() += zs[c][k] * right_[c].transpose();
      }
    }
  }

 private:
  const Environment& left_;
  const MpoSite& w1_;
  const MpoSite& w2_;
  const Environment& right_;
  Eigen::Index dl_;
  Eigen::Index dr_;
};

// Brings the state to right-canonical form with the center on site 0.
void right_canonicalize(MatrixProductState& mps) {
  for (int i = mps.n_sites() - 1; i >= 1; --i) {
    SiteTensor& b = mps.site(i);
    const Eigen::Index dl = b[0].rows();
    const Eigen::Index dr = b[0].cols();
    Matrix m(dl, 2 * dr);
    m << b[0], b[1];
    Eigen::HouseholderQR<Matrix> qr(m.transpose());
    const Eigen::Index k = std::min(dl, 2 * dr);
    const Matrix q = qr.householderQ() * Matrix::Identity(2 * dr, k);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    b[0] = q.topRows(dr).transpose();
    b[1] = q.bottomRows(dr).transpose();
    SiteTensor& prev = mps.site(i - 1);
    for (auto& mat : prev) mat = (mat * r.transpose()).eval();
  }
  SiteTensor& first = mps.site(0);
  const double n = std::sqrt(first[0].squaredNorm() + first[1].squaredNorm());
  if (!(n > 0.0)) fail(ErrorCode::Numerical, "matrix product state has zero norm");
  for (auto& mat : first) mat /= n;
  mps.set_center(0);
}

class Engine {
 public:
  Engine(const LadderInstance& inst, const DmrgOptions& options, MatrixProductState mps)
      : inst_(inst), options_(options), mps_(std::move(mps)) {
    local_.tol = options.local_tol;
  }

  DmrgStage run_stage(int stage_index, double field) {
    mpo_ = build_mpo(inst_, field);
    rebuild_environments();

    DmrgStage stage;
    stage.field = field;
    const int n = mps_.n_sites();
    double previous = std::numeric_limits<double>::quiet_NaN();
    double energy = 0.0;
    for (int sweep = 1; sweep <= options_.max_sweeps; ++sweep) {
      for (int i = 0; i + 1 < n; ++i) energy = update_bond(i, true, stage.max_truncation);
      stage.half_sweep_energies.push_back(energy);
      for (int i = n - 2; i >= 0; --i) energy = update_bond(i, false, stage.max_truncation);
      stage.half_sweep_energies.push_back(energy);
      stage.sweeps = sweep;
      if (sweep >= 2 && std::abs(energy - previous) < options_.energy_tol) {
        stage.energy = energy;
        return stage;
      }
      if (sweep == options_.max_sweeps) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "DMRG stage " << stage_index << " (field " << field << ") did not converge within "
            << options_.max_sweeps << " sweeps; last two sweep energies " << previous << ", " << energy;
        throw ConvergenceError(msg.str(), std::abs(energy - previous));
      }
      previous = energy;
    }
    fail(ErrorCode::InvalidArgument, "max_sweeps must be positive");
  }

  const MatrixProductState& state() const { return mps_; }

 private:
  void rebuild_environments() {
    const int n = mps_.n_sites();
    left_.assign(static_cast<std::size_t>(n + 1), Environment{});
    right_.assign(static_cast<std::size_t>(n + 1), Environment{});
    left_[0] = left_boundary();
    right_[static_cast<std::size_t>(n)] = right_boundary();
    for (int i = n - 1; i >= 1; --i)
      right_[static_cast<std::size_t>(i)] =
          extend_right(right_[static_cast<std::size_t>(i + 1)], mps_.site(i), mpo_.sites[static_cast<std::size_t>(i)]);
  }

  double update_bond(int i, bool moving_right, double& max_truncation) {
    const auto ui = static_cast<std::size_t>(i);
    SiteTensor& a = mps_.site(i);
    SiteTensor& b = mps_.site(i + 1);
    const Eigen::Index dl = a[0].rows();
    const Eigen::Index dr = b[0].cols();
    const Eigen::Index block = dl * dr;

    TwoSiteOperator op(left_[ui], mpo_.sites[ui], mpo_.sites[ui + 1], right_[ui + 2], dl, dr);
    Eigen::VectorXd start(op.dim());
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2)
        Eigen::Map<Matrix>(start.data() + (2 * s1 + s2) * block, dl, dr) = a[s1] * b[s2];
    if (!(start.norm() > 1e-300)) start.setOnes();

    const EigenPair pair = lowest_eigenpair(std::cref(op), op.dim(), start, local_);

    Matrix theta(2 * dl, 2 * dr);
    for (int s1 = 0; s1 < 2; ++s1)
      for (int s2 = 0; s2 < 2; ++s2)
        theta.block(s1 * dl, s2 * dr, dl, dr) =
            Eigen::Map<const Matrix>(pair.vector.data() + (2 * s1 + s2) * block, dl, dr);

    Eigen::BDCSVD<Matrix> svd(theta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index keep = 1;
    while (keep < sv.size() && keep < options_.chi && sv[keep] > options_.svd_cutoff * sv[0]) ++keep;
    const double total = sv.squaredNorm();
    const double kept = sv.head(keep).squaredNorm();
    max_truncation = std::max(max_truncation, std::max(0.0, (total - kept) / total));

    const Eigen::VectorXd s = sv.head(keep) / std::sqrt(kept);
    const Matrix u = svd.matrixU().leftCols(keep);
    const Matrix vt = svd.matrixV().leftCols(keep).transpose();
    if (moving_right) {
      for (int s1 = 0; s1 < 2; ++s1) a[s1] = u.middleRows(s1 * dl, dl);
      const Matrix svt = s.asDiagonal() * vt;
      for (int s2 = 0; s2 < 2; ++s2) b[s2] = svt.middleCols(s2 * dr, dr);
      left_[ui + 1] = extend_left(left_[ui], a, mpo_.sites[ui]);
      mps_.set_center(i + 1);
    } else {
      for (int s2 = 0; s2 < 2; ++s2) b[s2] = vt.middleCols(s2 * dr, dr);
      for (int s1 = 0; s1 < 2; ++s1) a[s1] = u.middleRows(s1 * dl, dl) * s.asDiagonal();
      right_[ui + 1] = extend_right(right_[ui + 2], b, mpo_.sites[ui + 1]);
      mps_.set_center(i);
    }
    return pair.value;
  }

  const LadderInstance& inst_;
  const DmrgOptions& options_;
  MatrixProductState mps_;
  Mpo mpo_;
  std::vector<Environment> left_;
  std::vector<Environment> right_;
  KrylovOptions local_;
};

// Little-endian encoding so checkpoints move between hosts.
void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(bytes, 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int k = 0; k < 4; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(bytes, 4);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) fail(ErrorCode::Parse, "checkpoint is truncated");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) fail(ErrorCode::Parse, "checkpoint is truncated");
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[k]) << (8 * k);
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

constexpr char kMagic[8] = {'T', 'F', 'I', 'M', 'P', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kMaxCheckpointBond = 1u << 16;

}  // namespace

int Mpo::max_bond_dim() const {
  int d = 0;
  for (const auto& s : sites) d = std::max({d, s.left_dim, s.right_dim});
  return d;
}

Mpo build_mpo(const LadderInstance& inst, double field) {
  validate(inst);
  if (!std::isfinite(field)) fail(ErrorCode::Domain, "transverse field must be finite");
  const int n = inst.n_sites;
  const int terms = n - 2;
  const std::vector<double> j3 = inst.noisy_j3();
  const std::vector<double> j2 = inst.noisy_j2();
  const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  const Eigen::Matrix2d z = pauli_z();

  Mpo mpo;
  mpo.sites.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    MpoSite& w = mpo.sites[static_cast<std::size_t>(k)];
    w.left_dim = kMpoDim;
    w.right_dim = kMpoDim;
    w.entries.push_back({kStart, kStart, id});
    w.entries.push_back({kDone, kDone, id});
    if (field != 0.0) w.entries.push_back({kStart, kDone, -field * pauli_x()});
    if (k < terms) {
      w.entries.push_back({kStart, kOpen3, -j3[static_cast<std::size_t>(k)] * z});
      w.entries.push_back({kStart, kOpen2, -j2[static_cast<std::size_t>(k)] * z});
    }
    if (k >= 1 && k - 1 < terms) {
      w.entries.push_back({kOpen3, kWait, z});
      w.entries.push_back({kOpen2, kWait, id});
    }
    if (k >= 2) w.entries.push_back({kWait, kDone, z});
  }
  return mpo;
}

Eigen::MatrixXd mpo_to_dense(const Mpo& mpo) {
  const int n = mpo.n_sites();
  if (n < 1 || n > 12) fail(ErrorCode::SizeLimit, "dense MPO contraction is limited to 1 <= N <= 12");
  std::vector<Matrix> partial(kMpoDim, Matrix::Zero(1, 1));
  partial[kStart](0, 0) = 1.0;
  for (const auto& w : mpo.sites) {
    const Eigen::Index d = partial[0].rows();
    std::vector<Matrix> next(static_cast<std::size_t>(w.right_dim), Matrix::Zero(2 * d, 2 * d));
    for (const auto& e : w.entries)
      for (int t = 0; t < 2; ++t)
        for (int s = 0; s < 2; ++s)
          if (e.op(t, s) != 0.0)
            next[static_cast<std::size_t>(e.right)].block(t * d, s * d, d, d) +=
                e.op(t, s) * partial[static_cast<std::size_t>(e.left)];
    partial = std::move(next);
  }
  return partial.back();
}

MatrixProductState::MatrixProductState(std::vector<SiteTensor> sites, int max_bond, int center)
    : sites_(std::move(sites)), max_bond_(max_bond), center_(center) {
  const int n = n_sites();
  if (n < 1) fail(ErrorCode::InvalidSize, "matrix product state needs at least one site");
  if (max_bond < 1) fail(ErrorCode::InvalidArgument, "bond dimension cap must be positive");
  if (center < 0 || center >= n) fail(ErrorCode::InvalidArgument, "canonical center out of range");
  Eigen::Index left = 1;
  for (int i = 0; i < n; ++i) {
    const SiteTensor& t = sites_[static_cast<std::size_t>(i)];
    if (t[0].rows() != left || t[1].rows() != left || t[0].cols() != t[1].cols())
      fail(ErrorCode::Dimension, "inconsistent bond dimensions at site " + std::to_string(i));
    left = t[0].cols();
  }
  if (left != 1) fail(ErrorCode::Dimension, "right boundary bond must have dimension 1");
}

MatrixProductState MatrixProductState::product_state(std::span<const double> angles, int max_bond) {
  std::vector<SiteTensor> sites;
  sites.reserve(angles.size());
  for (double a : angles) {
    if (!std::isfinite(a)) fail(ErrorCode::Domain, "product-state angle must be finite");
    sites.push_back({Matrix::Constant(1, 1, std::cos(a)), Matrix::Constant(1, 1, std::sin(a))});
  }
  return MatrixProductState(std::move(sites), max_bond, 0);
}

MatrixProductState MatrixProductState::random_product_state(int n_sites, int max_bond, std::uint64_t seed) {
  if (n_sites < 1) fail(ErrorCode::InvalidSize, "matrix product state needs at least one site");
  GaussianStream stream(seed);
  std::vector<double> angles(static_cast<std::size_t>(n_sites));
  for (auto& a : angles) a = stream.uniform_open0() * (std::numbers::pi / 2.0);
  return product_state(angles, max_bond);
}

int MatrixProductState::bond_dim(int bond) const {
  if (bond < 0 || bond > n_sites()) fail(ErrorCode::InvalidArgument, "bond index out of range");
  if (bond == n_sites()) return 1;
  return static_cast<int>(sites_[static_cast<std::size_t>(bond)][0].rows());
}

double MatrixProductState::norm() const {
  Matrix env = Matrix::Ones(1, 1);
  for (const auto& t : sites_) env = t[0].transpose() * env * t[0] + t[1].transpose() * env * t[1];
  return std::sqrt(std::max(0.0, env(0, 0)));
}

double MatrixProductState::isometry_defect() const {
  double worst = 0.0;
  for (int i = 0; i < n_sites(); ++i) {
    const SiteTensor& t = sites_[static_cast<std::size_t>(i)];
    if (i < center_) {
      const Matrix g = t[0].transpose() * t[0] + t[1].transpose() * t[1];
      worst = std::max(worst, (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    } else if (i > center_) {
      const Matrix g = t[0] * t[0].transpose() + t[1] * t[1].transpose();
      worst = std::max(worst, (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

std::vector<double> MatrixProductState::to_dense() const {
  if (n_sites() > 24) fail(ErrorCode::SizeLimit, "dense expansion is limited to N <= 24");
  Matrix v = Matrix::Ones(1, 1);
  for (const auto& t : sites_) {
    const Eigen::Index rows = v.rows();
    Matrix next(2 * rows, t[0].cols());
    next.topRows(rows) = v * t[0];
    next.bottomRows(rows) = v * t[1];
    v = std::move(next);
  }
  return std::vector<double>(v.data(), v.data() + v.size());
}

double mps_expectation(const MatrixProductState& mps, const Mpo& mpo) {
  if (mps.n_sites() != mpo.n_sites()) fail(ErrorCode::Dimension, "MPS and MPO lengths differ");
  Environment env = left_boundary();
  for (int i = 0; i < mps.n_sites(); ++i) env = extend_left(env, mps.site(i), mpo.sites[static_cast<std::size_t>(i)]);
  const double nrm = mps.norm();
  if (!(nrm > 0.0)) fail(ErrorCode::Numerical, "matrix product state has zero norm");
  const Matrix& done = env[mpo.sites.back().right_dim - 1];
  return active(done) ? done(0, 0) / (nrm * nrm) : 0.0;
}

std::vector<double> mps_magnetizations_z(const MatrixProductState& mps) {
  const int n = mps.n_sites();
  std::vector<Matrix> left(static_cast<std::size_t>(n + 1));
  std::vector<Matrix> right(static_cast<std::size_t>(n + 1));
  left[0] = Matrix::Ones(1, 1);
  for (int i = 0; i < n; ++i) {
    const SiteTensor& t = mps.site(i);
    const Matrix& e = left[static_cast<std::size_t>(i)];
    left[static_cast<std::size_t>(i + 1)] = t[0].transpose() * e * t[0] + t[1].transpose() * e * t[1];
  }
  right[static_cast<std::size_t>(n)] = Matrix::Ones(1, 1);
  for (int i = n - 1; i >= 0; --i) {
    const SiteTensor& t = mps.site(i);
    const Matrix& e = right[static_cast<std::size_t>(i + 1)];
    right[static_cast<std::size_t>(i)] = t[0] * e * t[0].transpose() + t[1] * e * t[1].transpose();
  }
  const double norm2 = left[static_cast<std::size_t>(n)](0, 0);
  if (!(norm2 > 0.0)) fail(ErrorCode::Numerical, "matrix product state has zero norm");

  std::vector<double> mags(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const SiteTensor& t = mps.site(i);
    const Matrix& l = left[static_cast<std::size_t>(i)];
    const Matrix& r = right[static_cast<std::size_t>(i + 1)];
    const double up = ((l * t[0]) * r).cwiseProduct(t[0]).sum();
    const double down = ((l * t[1]) * r).cwiseProduct(t[1]).sum();
    mags[static_cast<std::size_t>(i)] = std::clamp((up - down) / norm2, -1.0, 1.0);
  }
  return mags;
}

double mps_magnetization_z(const MatrixProductState& mps, int site) {
  if (site < 0 || site >= mps.n_sites()) fail(ErrorCode::InvalidArgument, "site index out of range");
  return mps_magnetizations_z(mps)[static_cast<std::size_t>(site)];
}

AnnealSchedule AnnealSchedule::defaults(double field_target) {
  AnnealSchedule s;
  s.field_target = field_target;
  s.field_start = std::max(10.0, 4.0 * field_target);
  s.n_steps = 8;
  s.interpolation = Interpolation::Geometric;
  return s;
}

void AnnealSchedule::validate() const {
  if (!std::isfinite(field_start) || !(field_start > 0.0)) fail(ErrorCode::Domain, "anneal start field must be positive");
  if (!std::isfinite(field_target) || field_target < 0.0)
    fail(ErrorCode::Domain, "anneal target field must be finite and nonnegative");
  if (n_steps < 1) fail(ErrorCode::InvalidArgument, "anneal schedule needs at least one step");
}

std::vector<double> AnnealSchedule::fields() const {
  validate();
  if (n_steps == 1) return {field_target};
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  if (interpolation == Interpolation::Linear) {
    for (int k = 0; k < n_steps; ++k)
      out.push_back(field_start + (field_target - field_start) * static_cast<double>(k) / (n_steps - 1));
  } else if (field_target > 0.0) {
    const double ratio = field_target / field_start;
    for (int k = 0; k < n_steps; ++k)
      out.push_back(field_start * std::pow(ratio, static_cast<double>(k) / (n_steps - 1)));
  } else {
    const int descending = n_steps - 1;
    for (int k = 0; k < descending; ++k)
      out.push_back(descending == 1 ? field_start
                                    : field_start * std::pow(1e-3, static_cast<double>(k) / (descending - 1)));
    out.push_back(0.0);
  }
  out.back() = field_target;
  return out;
}

DmrgResult dmrg_ground_state(const LadderInstance& inst, const DmrgOptions& options) {
  validate(inst);
  if (options.chi < 1) fail(ErrorCode::InvalidArgument, "chi must be positive");
  if (options.max_sweeps < 2) fail(ErrorCode::InvalidArgument, "max_sweeps must be at least 2");
  if (!(options.energy_tol > 0.0) || !(options.local_tol > 0.0))
    fail(ErrorCode::InvalidArgument, "DMRG tolerances must be positive");
  const std::vector<double> fields = options.schedule.fields();

  DmrgResult result;
  MatrixProductState start;
  int first_stage = 0;
  if (!options.checkpoint.empty() && std::filesystem::exists(options.checkpoint)) {
    MpsCheckpoint ck = load_checkpoint(options.checkpoint);
    if (ck.n_sites != inst.n_sites || ck.chi != options.chi || ck.seed != options.seed ||
        ck.completed_stages < 1 || ck.completed_stages > static_cast<int>(fields.size()) ||
        ck.field != fields[static_cast<std::size_t>(ck.completed_stages - 1)])
      fail(ErrorCode::InvalidArgument, "checkpoint " + options.checkpoint.string() + " does not match this run");
    start = std::move(ck.mps);
    first_stage = ck.completed_stages;
  } else {
    start = MatrixProductState::random_product_state(inst.n_sites, options.chi, options.seed);
  }
  right_canonicalize(start);
  result.resumed_stages = first_stage;

  Engine engine(inst, options, std::move(start));
  for (int k = first_stage; k < static_cast<int>(fields.size()); ++k) {
    result.stages.push_back(engine.run_stage(k, fields[static_cast<std::size_t>(k)]));
    if (!options.checkpoint.empty()) {
      MpsCheckpoint ck;
      ck.n_sites = inst.n_sites;
      ck.chi = options.chi;
      ck.field = fields[static_cast<std::size_t>(k)];
      ck.seed = options.seed;
      ck.completed_stages = k + 1;
      ck.mps = engine.state();
      save_checkpoint(ck, options.checkpoint);
    }
  }
  result.mps = engine.state();
  result.energy = result.stages.empty() ? mps_expectation(result.mps, build_mpo(inst, fields.back()))
                                        : result.stages.back().energy;
  return result;
}

void save_checkpoint(const MpsCheckpoint& ck, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(ck.n_sites));
    put_u32(out, static_cast<std::uint32_t>(ck.chi));
    put_u32(out, static_cast<std::uint32_t>(ck.completed_stages));
    put_u32(out, static_cast<std::uint32_t>(ck.mps.center()));
    put_u64(out, ck.seed);
    put_f64(out, ck.field);
    for (int i = 0; i < ck.mps.n_sites(); ++i) {
      const SiteTensor& t = ck.mps.site(i);
      put_u32(out, static_cast<std::uint32_t>(t[0].rows()));
      put_u32(out, static_cast<std::uint32_t>(t[0].cols()));
      for (const auto& m : t)
        for (Eigen::Index k = 0; k < m.size(); ++k) put_f64(out, m.data()[k]);
    }
    out.flush();
    if (!out) fail(ErrorCode::Io, "failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

MpsCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic))
    fail(ErrorCode::Parse, path.string() + " is not a tfinfer MPS checkpoint");
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion)
    fail(ErrorCode::Parse, "unsupported checkpoint version " + std::to_string(version));

  MpsCheckpoint ck;
  ck.n_sites = static_cast<int>(get_u32(in));
  ck.chi = static_cast<int>(get_u32(in));
  ck.completed_stages = static_cast<int>(get_u32(in));
  const int center = static_cast<int>(get_u32(in));
  ck.seed = get_u64(in);
  ck.field = get_f64(in);
  if (ck.n_sites < 1 || ck.n_sites > 100000 || ck.chi < 1) fail(ErrorCode::Parse, "checkpoint header is corrupt");

  std::vector<SiteTensor> sites(static_cast<std::size_t>(ck.n_sites));
  for (auto& t : sites) {
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (rows == 0 || cols == 0 || rows > kMaxCheckpointBond || cols > kMaxCheckpointBond)
      fail(ErrorCode::Parse, "checkpoint tensor shape is corrupt");
    for (auto& m : t) {
      m.resize(rows, cols);
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = get_f64(in);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::Parse, "checkpoint has trailing data");
  try {
    ck.mps = MatrixProductState(std::move(sites), ck.chi, center);
  } catch (const Error& e) {
    fail(ErrorCode::Parse, std::string("checkpoint state is inconsistent: ") + e.what());
  }
  return ck;
}

}  // namespace tfinfer
