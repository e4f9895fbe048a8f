#include "tfinfer/meanfield_sk.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "tfinfer/error.hpp"

namespace tfinfer {

namespace {

constexpr double kOuterCutoff = 9.0;
constexpr double kInnerMargin = 10.0;
constexpr double kProjectionEps = 1e-12;

constexpr std::array<double, 4> kGlNodes{0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                         0.9602898564975363};
constexpr std::array<double, 4> kGlWeights{0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                           0.1012285362903763};

double normal_density(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double ln2cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a));
}
double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Newton iteration on erf(x) = y from a logistic-style starting point.
double inverse_erf(double y) {
  if (y <= -1.0) return -std::numeric_limits<double>::infinity();
  if (y >= 1.0) return std::numeric_limits<double>::infinity();
  const double t = std::log((1.0 - y) * (1.0 + y));
  double x = std::copysign(std::sqrt(std::max(0.0, -t)), y);
  for (int it = 0; it < 100; ++it) {
    const double step = (std::erf(x) - y) / (2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x));
    x -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return x;
}

// 8-point Gauss-Legendre panels on [lo, hi] in the variable u, appended in
// increasing order.
void legendre_panels(double lo, double hi, int panels, std::vector<double>& u, std::vector<double>& w) {
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    for (int k = 3; k >= 0; --k) {
      u.push_back(mid - 0.5 * h * kGlNodes[static_cast<std::size_t>(k)]);
      w.push_back(0.5 * h * kGlWeights[static_cast<std::size_t>(k)]);
    }
    for (int k = 0; k < 4; ++k) {
      u.push_back(mid + 0.5 * h * kGlNodes[static_cast<std::size_t>(k)]);
      w.push_back(0.5 * h * kGlWeights[static_cast<std::size_t>(k)]);
    }
  }
}

// Positive half of a rule symmetric about zero: nodes y_j > 0 with weights
// w_j, each standing for the pair (y_j, -y_j).
struct HalfRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

HalfRule inner_rule(const QuadratureSpec& quad, double half_width) {
  HalfRule rule;
  if (quad.kind == QuadratureSpec::Kind::GaussHermite) {
    const GaussRule gh = gauss_hermite_rule(quad.n_nodes_inner);
    const std::size_t n = gh.nodes.size();
    for (std::size_t i = n / 2; i < n; ++i) {
      rule.nodes.push_back(gh.nodes[i]);
      rule.log_weights.push_back(std::log(gh.weights[i]));
    }
    return rule;
  }
  std::vector<double> u, w;
  legendre_panels(0.0, half_width, quad.n_nodes_inner / 16, u, w);
  for (std::size_t j = 0; j < u.size(); ++j) {
    rule.nodes.push_back(u[j]);
    rule.log_weights.push_back(std::log(w[j]) - 0.5 * u[j] * u[j] - 0.5 * std::log(2.0 * std::numbers::pi));
  }
  return rule;
}

GaussRule outer_rule(const QuadratureSpec& quad, double slope, double shift) {
  if (quad.kind == QuadratureSpec::Kind::GaussHermite) return gauss_hermite_rule(quad.n_nodes_outer);
  if (!(slope > 0.0)) return stretched_legendre_rule(quad.n_nodes_outer, 0.0, 1.0, kOuterCutoff);
  const double center = std::clamp(-shift / slope, -kOuterCutoff + 1.0, kOuterCutoff - 1.0);
  const double width = std::clamp(1.0 / slope, 1e-3, 1.0);
  return stretched_legendre_rule(quad.n_nodes_outer, center == 0.0 ? 0.0 : center, width, kOuterCutoff);
}

// Inner averages over y at fixed A = s beta sqrt(q) z + J0 beta m. Pairs
// (y, -y) are summed together so that A -> -A flips odd moments exactly.
struct InnerMoments {
  double log_z = 0.0;      // ln int Dy 2 cosh Psi
  double mu = 0.0;         // <Phi/Psi tanh-like> : the m integrand
  double r_local = 0.0;    // the r integrand
  double numerator = 0.0;  // int Dy sinh Psi Phi / Psi^2, scaled by a positive factor
};

class InnerIntegrator {
 public:
  InnerIntegrator(const HalfRule& rule, double b, double bg2) : rule_(rule), b_(b), bg2_(bg2) {
    psi_.resize(2 * rule.nodes.size());
    phi_.resize(2 * rule.nodes.size());
  }

  InnerMoments operator()(double a) {
    const std::size_t h = rule_.nodes.size();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < h; ++j) {
      const double by = b_ * rule_.nodes[j];
      const double pp = a + by;
      const double pm = a - by;
      phi_[2 * j] = pp;
      phi_[2 * j + 1] = pm;
      psi_[2 * j] = std::sqrt(bg2_ + pp * pp);
      psi_[2 * j + 1] = std::sqrt(bg2_ + pm * pm);
      top = std::max(top, std::max(psi_[2 * j], psi_[2 * j + 1]) + rule_.log_weights[j]);
    }
    double d = 0.0, nmu = 0.0, nr = 0.0, nsig = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      double c2 = 0.0, mu2 = 0.0, r2 = 0.0, s2 = 0.0;
      for (int side = 0; side < 2; ++side) {
        const double ps = psi_[2 * j + static_cast<std::size_t>(side)];
        const double ph = phi_[2 * j + static_cast<std::size_t>(side)];
        const double e = std::exp(ps + rule_.log_weights[j] - top);
        const double damp = std::exp(-2.0 * ps);
        const double ch = 0.5 * e * (1.0 + damp);
        const double sh = -0.5 * e * std::expm1(-2.0 * ps);
        const double ratio = ps > 0.0 ? ph / ps : 0.0;
        c2 += ch;
        mu2 += sh * ratio;
        r2 += ratio * ratio * ch + (ps > 0.0 ? bg2_ * sh / (ps * ps * ps) : 0.0);
        s2 += ps > 0.0 ? sh * ratio / ps : 0.0;
      }
      d += c2;
      nmu += mu2;
      nr += r2;
      nsig += s2;
    }
    InnerMoments out;
    out.log_z = top + std::log(2.0 * d);
    out.mu = nmu / d;
    out.r_local = nr / d;
    out.numerator = nsig;
    return out;
  }

 private:
  const HalfRule& rule_;
  double b_;
  double bg2_;
  std::vector<double> psi_;
  std::vector<double> phi_;
};

NoisyRhs noisy_rhs_unchecked(const MeanFieldParams& p, const QuadratureSpec& quad, double m, double q, double r) {
  const double s = p.noisy_sd();
  const double slope = s * p.beta * std::sqrt(std::max(q, 0.0));
  const double shift = p.j0 * p.beta * m;
  const double b = s * p.beta * std::sqrt(std::max(r - q, 0.0));
  const double bg = p.beta * p.field;
  const HalfRule yr = inner_rule(quad, b + kInnerMargin);
  const GaussRule zr = outer_rule(quad, slope, shift);
  InnerIntegrator inner(yr, b, bg * bg);

  NoisyRhs out;
  double replicon = 0.0;
  const std::size_t n = zr.nodes.size();
  auto add = [&](std::size_t i) {
    const InnerMoments mo = inner(slope * zr.nodes[i] + shift);
    const double w = zr.weights[i];
    const double chi = mo.r_local - mo.mu * mo.mu;
    return std::array<double, 5>{w * mo.mu, w * mo.mu * mo.mu, w * mo.r_local, w * mo.log_z, w * chi * chi};
  };
  for (std::size_t i = 0; i < n / 2; ++i) {
    const auto lo = add(i);
    const auto hi = add(n - 1 - i);
    out.m += lo[0] + hi[0];
    out.q += lo[1] + hi[1];
    out.r += lo[2] + hi[2];
    out.log_partition += lo[3] + hi[3];
    replicon += lo[4] + hi[4];
  }
  if (n % 2 == 1) {
    const auto mid = add(n / 2);
    out.m += mid[0];
    out.q += mid[1];
    out.r += mid[2];
    out.log_partition += mid[3];
    replicon += mid[4];
  }
  out.replicon = s * s * p.beta * p.beta * replicon;
  if (!std::isfinite(out.m) || !std::isfinite(out.q) || !std::isfinite(out.r) || !std::isfinite(out.log_partition))
    fail(ErrorCode::Numerical, "non-finite value in the noisy-branch integrals");
  return out;
}

double noisy_free_energy(const MeanFieldParams& p, double m, double q, double r, double log_partition) {
  const double s2 = p.noisy_sd() * p.noisy_sd();
  return s2 * p.beta * p.beta * (q * q - r * r) / 4.0 - p.j0 * p.beta * m * m / 2.0 + log_partition;
}

double original_free_energy(const MeanFieldParams& p, double m0, double q0, double log_partition) {
  const double a = p.sigma * p.sigma * p.beta0 * p.beta0;
  return a * q0 * q0 / 4.0 + a / 4.0 - a * q0 / 2.0 - p.j0 * p.beta0 * m0 * m0 / 2.0 + log_partition;
}

// Fixed-point solve of x = g(x) over the components listed in `free`; the
// other components stay at their starting values. Damped iteration first,
// then Newton steps with a forward-difference Jacobian and backtracking.
struct FixedPointResult {
  Eigen::VectorXd x;
  double residual = 0.0;
  int evaluations = 0;
  int projections = 0;
  bool converged = false;
};

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Projector = std::function<int(Eigen::VectorXd&)>;

FixedPointResult solve_fixed_point(const VectorMap& g, Eigen::VectorXd x, const std::vector<int>& free,
                                   const Projector& project, double tol, int max_evals, double damping) {
  FixedPointResult out;
  auto eval = [&](const Eigen::VectorXd& at) {
    ++out.evaluations;
    return g(at);
  };
  out.projections += project(x);
  Eigen::VectorXd gx = eval(x);
  auto defect = [](const Eigen::VectorXd& gv, const Eigen::VectorXd& xv) { return (gv - xv).cwiseAbs().maxCoeff(); };
  double res = defect(gx, x);

  auto damped_step = [&] {
    for (int i : free) x[i] += damping * (gx[i] - x[i]);
    out.projections += project(x);
    gx = eval(x);
    res = defect(gx, x);
  };

  for (int k = 0; k < 30 && res > 1e-2 && out.evaluations < max_evals; ++k) damped_step();

  const auto k = static_cast<Eigen::Index>(free.size());
  while (res > tol && out.evaluations < max_evals) {
    Eigen::VectorXd f(k);
    for (Eigen::Index a = 0; a < k; ++a) f[a] = gx[free[static_cast<std::size_t>(a)]] - x[free[static_cast<std::size_t>(a)]];
    Eigen::MatrixXd jac(k, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const int idx = free[static_cast<std::size_t>(c)];
      double h = 1e-7 * std::max(1.0, std::abs(x[idx]));
      Eigen::VectorXd xp = x;
      xp[idx] += h;
      Eigen::VectorXd probe = xp;
      if (project(probe) > 0 || probe[idx] != xp[idx]) {
        h = -h;
        xp = x;
        xp[idx] += h;
      }
      const Eigen::VectorXd gp = eval(xp);
      for (Eigen::Index a = 0; a < k; ++a) {
        const int row = free[static_cast<std::size_t>(a)];
        jac(a, c) = ((gp[row] - xp[row]) - f[a]) / h;
      }
    }
    const Eigen::VectorXd dx = -jac.fullPivLu().solve(f);
    bool accepted = false;
    if (dx.allFinite()) {
      double lambda = 1.0;
      for (int t = 0; t < 8 && out.evaluations < max_evals; ++t, lambda *= 0.5) {
        Eigen::VectorXd xn = x;
        for (Eigen::Index a = 0; a < k; ++a) xn[free[static_cast<std::size_t>(a)]] += lambda * dx[a];
        const int repaired = project(xn);
        const Eigen::VectorXd gn = eval(xn);
        const double rn = defect(gn, xn);
        if (rn < res) {
          out.projections += repaired;
          x = xn;
          gx = gn;
          res = rn;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      for (int t = 0; t < 20 && res > tol && out.evaluations < max_evals; ++t) damped_step();
    }
  }
  out.x = x;
  out.residual = res;
  out.converged = res <= tol;
  return out;
}

int project_original(Eigen::VectorXd& x) {
  x[0] = std::clamp(x[0], -1.0, 1.0);
  x[1] = std::clamp(x[1], 0.0, 1.0);
  return 0;
}

int project_noisy(Eigen::VectorXd& x) {
  x[0] = std::clamp(x[0], -1.0, 1.0);
  x[1] = std::clamp(x[1], 0.0, 1.0);
  if (x[2] < x[1]) {
    x[2] = std::min(1.0, x[1] + kProjectionEps);
    x[1] = std::min(x[1], x[2]);
    return 1;
  }
  x[2] = std::min(x[2], 1.0);
  return 0;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double MeanFieldParams::noisy_sd() const { return std::sqrt(sigma * sigma + gamma * gamma); }

void MeanFieldParams::validate() const {
  for (double v : {sigma, gamma, j0, beta0, beta, field})
    if (!std::isfinite(v)) fail(ErrorCode::Domain, "mean-field parameters must be finite");
  if (sigma < 0.0 || gamma < 0.0) fail(ErrorCode::Domain, "sigma and gamma must be nonnegative");
  if (!(beta0 > 0.0) || !(beta > 0.0)) fail(ErrorCode::Domain, "beta0 and beta must be positive");
  if (field < 0.0) fail(ErrorCode::Domain, "transverse field must be nonnegative");
}

GaussRule gauss_hermite_rule(int n) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "Gauss-Hermite rule needs at least one node");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
    const double v = solver.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = v * v;
  }
  for (int i = 0; i < n / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

GaussRule stretched_legendre_rule(int n, double center, double width, double cutoff) {
  if (n < 16 || n % 16 != 0) fail(ErrorCode::InvalidArgument, "stretched Legendre rule needs a multiple of 16 nodes");
  if (!(width > 0.0) || !(cutoff > 0.0) || !std::isfinite(center) || std::abs(center) >= cutoff)
    fail(ErrorCode::InvalidArgument, "invalid stretched Legendre rule geometry");
  std::vector<double> u, w;
  if (center == 0.0) {
    std::vector<double> hu, hw;
    legendre_panels(0.0, std::asinh(cutoff / width), n / 16, hu, hw);
    for (std::size_t j = hu.size(); j-- > 0;) {
      u.push_back(-hu[j]);
      w.push_back(hw[j]);
    }
    u.insert(u.end(), hu.begin(), hu.end());
    w.insert(w.end(), hw.begin(), hw.end());
  } else {
    legendre_panels(std::asinh((-cutoff - center) / width), std::asinh((cutoff - center) / width), n / 8, u, w);
  }
  GaussRule rule;
  rule.nodes.resize(u.size());
  rule.weights.resize(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double z = center + width * std::sinh(u[j]);
    rule.nodes[j] = z;
    rule.weights[j] = w[j] * width * std::cosh(u[j]) * normal_density(z);
  }
  return rule;
}

void QuadratureSpec::validate() const {
  if (n_nodes_outer < 8 || n_nodes_inner < 8) fail(ErrorCode::InvalidArgument, "quadrature node counts must be >= 8");
  if (kind == Kind::StretchedLegendre && (n_nodes_outer % 16 != 0 || n_nodes_inner % 16 != 0))
    fail(ErrorCode::InvalidArgument, "Legendre node counts must be multiples of 16");
  if (kind == Kind::GaussHermite && n_nodes_inner % 2 != 0)
    fail(ErrorCode::InvalidArgument, "Gauss-Hermite inner node count must be even");
}

double phi0(double z0, const MeanFieldParams& p, double q0, double m0) {
  if (q0 < 0.0) fail(ErrorCode::Domain, "q0 must be nonnegative");
  return std::sqrt(p.sigma * p.sigma * p.beta0 * p.beta0 * q0) * z0 + p.j0 * p.beta0 * m0;
}

double phi(double z, double y, const MeanFieldParams& p, double q, double m, double r) {
  if (q < 0.0) fail(ErrorCode::Domain, "q must be nonnegative");
  if (r < q) fail(ErrorCode::Domain, "r must not be smaller than q");
  const double s2 = p.sigma * p.sigma + p.gamma * p.gamma;
  return std::sqrt(s2 * p.beta * p.beta * q) * z + p.j0 * p.beta * m + std::sqrt(s2 * p.beta * p.beta * (r - q)) * y;
}

double psi(double phi_value, const MeanFieldParams& p) {
  return std::sqrt(p.beta * p.beta * p.field * p.field + phi_value * phi_value);
}

OriginalRhs original_rhs(const MeanFieldParams& p, const QuadratureSpec& quad, double m0, double q0) {
  if (q0 < 0.0) fail(ErrorCode::Domain, "q0 must be nonnegative");
  const double slope = p.sigma * p.beta0 * std::sqrt(q0);
  const double shift = p.j0 * p.beta0 * m0;
  const GaussRule zr = outer_rule(quad, slope, shift);
  OriginalRhs out;
  const std::size_t n = zr.nodes.size();
  auto term = [&](std::size_t i) {
    const double x = slope * zr.nodes[i] + shift;
    const double t = std::tanh(x);
    const double w = zr.weights[i];
    return std::array<double, 3>{w * t, w * t * t, w * ln2cosh(x)};
  };
  for (std::size_t i = 0; i < n / 2; ++i) {
    const auto lo = term(i);
    const auto hi = term(n - 1 - i);
    out.m0 += lo[0] + hi[0];
    out.q0 += lo[1] + hi[1];
    out.log_partition += lo[2] + hi[2];
  }
  if (n % 2 == 1) {
    const auto mid = term(n / 2);
    out.m0 += mid[0];
    out.q0 += mid[1];
    out.log_partition += mid[2];
  }
  return out;
}

NoisyRhs noisy_rhs(const MeanFieldParams& p, const QuadratureSpec& quad, double m, double q, double r) {
  if (q < 0.0) fail(ErrorCode::Domain, "q must be nonnegative");
  if (r < q) fail(ErrorCode::Domain, "r must not be smaller than q");
  return noisy_rhs_unchecked(p, quad, m, q, r);
}

namespace {

// Below these a component counts as collapsed. Near a transition the iteration
// contracts slowly along m, so a root within tolerance can sit at |m| ~ 1e-9.
constexpr double kMagnetized = 1e-6;
constexpr double kBroken = 1e-9;

// One candidate solution of either branch; x = (m0, q0) or (m, q, r).
struct Candidate {
  FixedPointResult fp;
  bool converged = false;
  double free_energy = 0.0;
  int rank = 0;  // 2: magnetized, 1: glassy (m = 0, q > 0), 0: paramagnetic
};

struct Branch {
  VectorMap g;
  Projector project;
  std::function<double(const Eigen::VectorXd&)> energy;
  double tol;
  int max_evals;
  double damping;
};

Candidate attempt(const Branch& br, const Eigen::VectorXd& x0, const std::vector<int>& free, int& evaluations) {
  Candidate c;
  if (free.empty()) {
    Eigen::VectorXd x = x0;
    br.project(x);
    c.fp.x = x;
    c.fp.residual = (br.g(x) - x).cwiseAbs().maxCoeff();
    c.fp.evaluations = 1;
  } else {
    c.fp = solve_fixed_point(br.g, x0, free, br.project, br.tol, br.max_evals, br.damping);
  }
  evaluations += c.fp.evaluations;
  c.converged = c.fp.residual <= br.tol;
  c.free_energy = br.energy(c.fp.x);
  c.rank = std::abs(c.fp.x[0]) > kMagnetized ? 2 : (c.fp.x[1] > kBroken ? 1 : 0);
  return c;
}

// Candidates are ranked by broken symmetry rather than compared by free
// energy alone: in the n -> 0 replica limit the physical saddle maximizes f
// along q, so the q = 0 paramagnet always has the largest -[f]. Among
// magnetized solutions the largest -[f] (lowest f) wins.
Candidate select_solution(const Branch& br, const std::optional<Eigen::VectorXd>& warm, const Eigen::VectorXd& ferro,
                          const Eigen::VectorXd& glass, const Eigen::VectorXd& para, const std::vector<int>& all,
                          const std::vector<int>& glass_free, const std::vector<int>& para_free, bool explore,
                          int& evaluations) {
  std::vector<Candidate> tried;
  auto best_of_rank = [&](int rank, bool highest_f) -> const Candidate* {
    const Candidate* best = nullptr;
    for (const auto& c : tried) {
      if (!c.converged || c.rank != rank) continue;
      if (best == nullptr || (highest_f ? c.free_energy > best->free_energy : c.free_energy < best->free_energy))
        best = &c;
    }
    return best;
  };

  // A magnetized start that collapses leaves m (and possibly q) at rounding
  // level; snap onto the symmetric subspace and polish there so that
  // symmetric solutions are exactly symmetric.
  auto settle = [&](Candidate c) {
    if (c.rank == 2) return c;
    Eigen::VectorXd x = c.fp.x;
    x[0] = 0.0;
    if (c.rank == 0) x[1] = 0.0;
    const int spent = c.fp.evaluations;
    c = attempt(br, x, c.rank == 1 ? glass_free : para_free, evaluations);
    c.fp.evaluations += spent;
    return c;
  };
  if (warm && std::abs((*warm)[0]) > kMagnetized) tried.push_back(settle(attempt(br, *warm, all, evaluations)));
  if (best_of_rank(2, true) == nullptr) tried.push_back(settle(attempt(br, ferro, all, evaluations)));
  if (const Candidate* c = best_of_rank(2, true)) return *c;

  if (explore) {
    if (best_of_rank(1, false) == nullptr) {
      Eigen::VectorXd start = glass;
      if (warm && (*warm)[1] > kBroken) {
        start = *warm;
        start[0] = 0.0;
      }
      tried.push_back(attempt(br, start, glass_free, evaluations));
    }
    if (const Candidate* c = best_of_rank(1, false)) return *c;
    // The paramagnetic r equation also has a frozen root near r = 1; starting
    // from r = 0 selects the root connected to the large-field limit.
    tried.push_back(attempt(br, para, para_free, evaluations));
    if (tried.back().converged) return tried.back();
  }
  for (int rank = 2; rank >= 0; --rank)
    if (const Candidate* c = best_of_rank(rank, rank == 2)) return *c;
  const Candidate* least = &tried.front();
  for (const auto& c : tried)
    if (c.fp.residual < least->fp.residual) least = &c;
  return *least;
}

}  // namespace

OriginalSolution solve_original(const MeanFieldParams& p, const QuadratureSpec& quad, const SolveOptions& options,
                                const OriginalSolution* warm) {
  p.validate();
  quad.validate();
  Branch br;
  br.g = [&](const Eigen::VectorXd& x) {
    const OriginalRhs rhs = original_rhs(p, quad, x[0], std::max(0.0, x[1]));
    return Eigen::Vector2d(rhs.m0, rhs.q0).eval();
  };
  br.project = project_original;
  br.energy = [&](const Eigen::VectorXd& x) {
    return original_free_energy(p, x[0], x[1], original_rhs(p, quad, x[0], x[1]).log_partition);
  };
  br.tol = options.tol_original;
  br.max_evals = options.max_iterations;
  br.damping = options.damping;

  std::optional<Eigen::VectorXd> start;
  if (warm != nullptr && warm->converged) start = Eigen::Vector2d(warm->m0, warm->q0);
  int evaluations = 0;
  const Candidate c = select_solution(br, start, Eigen::Vector2d(0.9, 0.9), Eigen::Vector2d(0.0, 0.9),
                                      Eigen::Vector2d(0.0, 0.0), {0, 1}, {1}, {}, options.paramagnetic_candidates,
                                      evaluations);
  OriginalSolution out;
  out.m0 = c.fp.x[0];
  out.q0 = c.fp.x[1];
  out.residual = c.fp.residual;
  out.iterations = evaluations;
  out.converged = c.converged;
  return out;
}

NoisySolution solve_noisy(const MeanFieldParams& p, const QuadratureSpec& quad, const SolveOptions& options,
                          const NoisySolution* warm) {
  p.validate();
  quad.validate();
  Branch br;
  br.g = [&](const Eigen::VectorXd& x) {
    const NoisyRhs rhs = noisy_rhs_unchecked(p, quad, x[0], std::max(0.0, x[1]), x[2]);
    return Eigen::Vector3d(rhs.m, rhs.q, rhs.r).eval();
  };
  br.project = project_noisy;
  br.energy = [&](const Eigen::VectorXd& x) {
    return noisy_free_energy(p, x[0], x[1], x[2], noisy_rhs_unchecked(p, quad, x[0], x[1], x[2]).log_partition);
  };
  br.tol = options.tol_noisy;
  br.max_evals = options.max_iterations;
  br.damping = options.damping;

  std::optional<Eigen::VectorXd> start;
  if (warm != nullptr && warm->converged) start = Eigen::Vector3d(warm->m, warm->q, warm->r);
  int evaluations = 0;
  const Candidate c = select_solution(br, start, Eigen::Vector3d(0.9, 0.9, 0.95), Eigen::Vector3d(0.0, 0.9, 0.95),
                                      Eigen::Vector3d(0.0, 0.0, 0.0), {0, 1, 2}, {1, 2}, {2},
                                      options.paramagnetic_candidates, evaluations);
  NoisySolution out;
  out.m = c.fp.x[0];
  out.q = c.fp.x[1];
  out.r = c.fp.x[2];
  out.residual = c.fp.residual;
  out.iterations = evaluations;
  out.converged = c.converged;
  out.projections = c.fp.projections;
  out.replicon = noisy_rhs_unchecked(p, quad, out.m, out.q, out.r).replicon;
  out.free_energy = c.free_energy;
  return out;
}

MeanFieldSolution combine(const OriginalSolution& o, const NoisySolution& n) {
  MeanFieldSolution s;
  s.m0 = o.m0;
  s.q0 = o.q0;
  s.m = n.m;
  s.q = n.q;
  s.r = n.r;
  s.residual = std::max(o.residual, n.residual);
  s.iterations = o.iterations + n.iterations;
  s.converged = o.converged && n.converged;
  return s;
}

double free_energy(const MeanFieldParams& p, const QuadratureSpec& quad, double m0, double q0, double m, double q,
                   double r) {
  p.validate();
  quad.validate();
  for (double v : {m0, q0, m, q, r})
    if (!std::isfinite(v)) fail(ErrorCode::Domain, "order parameters must be finite");
  const OriginalRhs o = original_rhs(p, quad, m0, q0);
  const NoisyRhs n = noisy_rhs(p, quad, m, q, r);
  const double f = original_free_energy(p, m0, q0, o.log_partition) + noisy_free_energy(p, m, q, r, n.log_partition);
  if (!std::isfinite(f)) fail(ErrorCode::Numerical, "free energy overflowed");
  return f;
}

double free_energy(const MeanFieldParams& p, const QuadratureSpec& quad, const MeanFieldSolution& s) {
  return free_energy(p, quad, s.m0, s.q0, s.m, s.q, s.r);
}

MeanFieldOverlap overlap_mf(const MeanFieldParams& p, const QuadratureSpec& quad, const MeanFieldSolution& s) {
  p.validate();
  quad.validate();
  if (!s.converged)
    throw ConvergenceError("refusing to evaluate the overlap of an unconverged mean-field solution", s.residual);

  MeanFieldOverlap out;
  const double slope0 = p.sigma * p.beta0 * std::sqrt(std::max(0.0, s.q0));
  const double shift0 = p.j0 * p.beta0 * s.m0;
  out.original_factor = slope0 > 0.0 ? std::erf(shift0 / (slope0 * std::numbers::sqrt2)) : sign_of(shift0);

  // Noisy factor: find where the sign of the y-integral flips along z and
  // integrate the sign against the normal distribution exactly.
  const double sd = p.noisy_sd();
  const double slope = sd * p.beta * std::sqrt(std::max(0.0, s.q));
  const double shift = p.j0 * p.beta * s.m;
  const double b = sd * p.beta * std::sqrt(std::max(0.0, s.r - s.q));
  const double bg = p.beta * p.field;
  const HalfRule yr = inner_rule(quad, b + kInnerMargin);
  InnerIntegrator inner(yr, b, bg * bg);
  auto sign_at = [&](double z) { return sign_of(inner(slope * z + shift).numerator); };

  if (!(slope > 0.0) || shift == 0.0) {
    // The y-integral is odd in its argument: with no z dependence its sign is
    // sign(shift), and with shift == 0 the z average cancels.
    out.noisy_factor = slope > 0.0 ? 0.0 : sign_of(shift);
    out.noisy_margin = out.noisy_factor * std::numeric_limits<double>::infinity();
    if (out.noisy_factor == 0.0) out.noisy_margin = 0.0;
  } else {
    const double half = 12.0 + std::abs(p.j0) / std::max(sd, 1e-3);
    constexpr int kScan = 4000;
    std::vector<double> zs, ss;
    for (int k = 0; k <= kScan; ++k) {
      const double z = -half + 2.0 * half * k / kScan;
      const double sg = sign_at(z);
      if (sg != 0.0) {
        zs.push_back(z);
        ss.push_back(sg);
      }
    }
    if (zs.empty()) {
      out.noisy_factor = 0.0;
      out.noisy_margin = 0.0;
    } else {
      std::vector<double> cuts;
      for (std::size_t k = 0; k + 1 < zs.size(); ++k) {
        if (ss[k] == ss[k + 1]) continue;
        double lo = zs[k], hi = zs[k + 1];
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double sg = sign_at(mid);
          if (sg == 0.0) {
            lo = hi = mid;
            break;
          }
          (sg == ss[k] ? lo : hi) = mid;
        }
        cuts.push_back(0.5 * (lo + hi));
      }
      double factor = 0.0;
      double left = -std::numeric_limits<double>::infinity();
      double current = ss.front();
      for (double c : cuts) {
        factor += current * (normal_cdf(c) - (std::isinf(left) ? 0.0 : normal_cdf(left)));
        left = c;
        current = -current;
      }
      factor += current * (1.0 - (std::isinf(left) ? 0.0 : normal_cdf(left)));
      out.noisy_factor = factor;
      if (cuts.size() == 1)
        out.noisy_margin = ss.front() < 0.0 ? -cuts[0] / std::numbers::sqrt2 : cuts[0] / std::numbers::sqrt2;
      else if (cuts.empty())
        out.noisy_margin = ss.front() * std::numeric_limits<double>::infinity();
      else
        out.noisy_margin = inverse_erf(factor);
    }
  }
  out.overlap = out.original_factor * out.noisy_factor;
  return out;
}

MfSweep sweep_field_mf(const MeanFieldParams& params, std::span<const double> fields, const QuadratureSpec& quad,
                       const SolveOptions& options) {
  params.validate();
  quad.validate();
  if (fields.empty()) fail(ErrorCode::InvalidArgument, "field grid is empty");
  MfSweep sweep;
  sweep.params = params;
  const OriginalSolution original = solve_original(params, quad, options);

  std::optional<NoisySolution> previous;
  for (double field : fields) {
    MeanFieldParams p = params;
    p.field = field;
    MfPoint point;
    point.gamma_noise = params.gamma;
    point.field = field;
    try {
      const NoisySolution noisy = solve_noisy(p, quad, options, previous ? &*previous : nullptr);
      point.solution = combine(original, noisy);
      point.replicon = noisy.replicon;
      if (noisy.converged) previous = noisy;
      if (point.solution.converged) {
        point.overlap = overlap_mf(p, quad, point.solution);
        point.rsb_warning = noisy.replicon > 1.0 || noisy.projections > 0;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Convergence && e.code() != ErrorCode::Numerical) throw;
      point.solution.converged = false;
    }
    if (!point.solution.converged) {
      ++sweep.failed;
      point.overlap.overlap = std::numeric_limits<double>::quiet_NaN();
      point.overlap.noisy_margin = std::numeric_limits<double>::quiet_NaN();
    }
    sweep.points.push_back(point);
  }

  double unstable_up_to = -std::numeric_limits<double>::infinity();
  for (const auto& pt : sweep.points)
    if (pt.solution.converged && pt.rsb_warning) unstable_up_to = std::max(unstable_up_to, pt.field);
  for (auto& pt : sweep.points) pt.rsb_warning = pt.field <= unstable_up_to;
  return sweep;
}

std::vector<MfGammaOpt> find_gamma_opt_mf(const MeanFieldParams& params, std::span<const double> gammas,
                                          std::span<const double> fields, const QuadratureSpec& quad,
                                          const SolveOptions& options, int workers) {
  if (gammas.empty()) fail(ErrorCode::InvalidArgument, "noise grid is empty");
  if (workers < 1) fail(ErrorCode::InvalidArgument, "workers must be at least 1");
  std::vector<MfGammaOpt> rows(gammas.size());
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::exception_ptr error;

  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= gammas.size()) return;
      try {
        MeanFieldParams p = params;
        p.gamma = gammas[i];
        MfGammaOpt row;
        row.gamma_noise = gammas[i];
        row.sweep = sweep_field_mf(p, fields, quad, options);
        row.failed = row.sweep.failed;
        std::vector<double> xs, margins, overlaps;
        double original_factor = 0.0;
        for (const auto& pt : row.sweep.points) {
          if (!pt.solution.converged) continue;
          xs.push_back(pt.field);
          margins.push_back(pt.overlap.noisy_margin);
          overlaps.push_back(pt.overlap.overlap);
          original_factor = pt.overlap.original_factor;
        }
        const bool finite = std::all_of(margins.begin(), margins.end(), [](double v) { return std::isfinite(v); });
        const bool ordered = std::any_of(overlaps.begin(), overlaps.end(), [](double v) { return v != 0.0; });
        if (xs.size() < 3) {
          row.opt.field = row.opt.max_overlap = std::numeric_limits<double>::quiet_NaN();
        } else if (!ordered) {
          // no magnetized point anywhere on the grid
          row.opt.field = std::numeric_limits<double>::quiet_NaN();
          row.opt.max_overlap = 0.0;
        } else if (finite) {
          row.opt = find_gamma_opt(xs, margins);
          row.opt.max_overlap = original_factor * std::erf(row.opt.max_overlap);
        } else {
          row.opt = find_gamma_opt(xs, overlaps);
        }
        rows[i] = std::move(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const int threads = std::min<int>(workers, static_cast<int>(gammas.size()));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return rows;
}

void write_mf_csv(std::span<const MfPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "gamma_noise,field,m0,q0,m,q,r,overlap,residual,converged,rsb_warning\n";
  for (const auto& pt : points) {
    const auto& s = pt.solution;
    out << fmt(pt.gamma_noise) << ',' << fmt(pt.field) << ',' << fmt(s.m0) << ',' << fmt(s.q0) << ',' << fmt(s.m)
        << ',' << fmt(s.q) << ',' << fmt(s.r) << ',' << fmt(pt.overlap.overlap) << ',' << fmt(s.residual) << ','
        << (s.converged ? 1 : 0) << ',' << (pt.rsb_warning ? 1 : 0) << '\n';
  }
  if (!out.flush()) fail(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace tfinfer
