// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,9] [--expect-fail 7] [--workdir DIR] [--report FILE]
//
// Criteria listed in --expect-fail still run and still print FAIL with their
// numbers; they only stop counting toward the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "tfinfer/disorder.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/ladder_classical.hpp"
#include "tfinfer/meanfield_sk.hpp"
#include "tfinfer/mps_dmrg.hpp"
#include "tfinfer/overlap.hpp"
#include "tfinfer/quantum_exact.hpp"
#include "tfinfer/rng.hpp"

using namespace tfinfer;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path workdir;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: Viterbi against exhaustive search ----

Outcome classical_oracle() {
  std::mt19937_64 rng(101);
  int compared = 0, unique = 0, energy_bad = 0, config_bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const int n = 8 + static_cast<int>(rng() % 13);
    const auto inst = generate_instance(n, 1.0, 0.0, realization_seed(101, static_cast<std::uint64_t>(k)));
    const auto vit = viterbi_ground_state(inst.j3, inst.j2);
    const auto brute = brute_force_ground_state(inst.j3, inst.j2);
    const double tol = 1e-12 * (n - 2);
    const double err = std::abs(vit.energy - brute.energy);
    worst = std::max(worst, err / (n - 2));
    if (err > tol) ++energy_bad;
    const auto ref = oracle::enumerate_ground_states(inst.j3, inst.j2, tol);
    if (std::abs(ref.min_energy - brute.energy) > tol) ++energy_bad;
    ++compared;
    if (ref.n_minimizers == 1) {
      ++unique;
      std::vector<int> v(vit.config.values().begin(), vit.config.values().end());
      if (v != ref.argmin || !(vit.config == brute.config)) ++config_bad;
    }
  }
  return {energy_bad == 0 && config_bad == 0,
          fmt("%d instances, max |dE|/(N-2)=%.2e, energy mismatches=%d, unique minima=%d, config mismatches=%d",
              compared, worst, energy_bad, unique, config_bad)};
}

// ---- 2: Lanczos against dense diagonalization ----

Outcome quantum_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> field_dist(0.05, 2.0);
  double worst_e = 0.0, worst_m = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int n = 4 + static_cast<int>(rng() % 7);
    const double field = field_dist(rng);
    const auto inst = generate_instance(n, 1.0, 0.4, realization_seed(102, static_cast<std::uint64_t>(k)));
    LanczosOptions opts;
    opts.tol = 1e-12;
    const auto gs = ground_state_lanczos(inst, field, opts);
    const auto ref = oracle::dense_ground_state(inst.noisy_j3(), inst.noisy_j2(), field);
    worst_e = std::max(worst_e, std::abs(gs.energy - ref.energy));
    const auto mz = magnetizations_z(gs.state);
    for (int i = 0; i < n; ++i)
      worst_m = std::max(worst_m, std::abs(mz[static_cast<std::size_t>(i)] - ref.mz[static_cast<std::size_t>(i)]));
  }
  const double t = seconds_since(t0);
  return {worst_e <= 1e-10 && worst_m <= 1e-8 && t < 120.0,
          fmt("100 instances N=4..10, max |dE|=%.2e, max |d<sz>|=%.2e, %.1fs", worst_e, worst_m, t)};
}

// ---- 3: DMRG against Lanczos ----

Outcome dmrg_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> field_dist(0.05, 2.0);
  double worst_e = 0.0;
  int sign_bad = 0, sites = 0;
  for (int k = 0; k < 50; ++k) {
    const int n = 8 + static_cast<int>(rng() % 9);
    const double field = field_dist(rng);
    const auto inst = generate_instance(n, 1.0, 0.4, realization_seed(103, static_cast<std::uint64_t>(k)));
    DmrgOptions opts;
    opts.chi = 64;
    opts.schedule = AnnealSchedule::defaults(field);
    opts.seed = static_cast<std::uint64_t>(k);
    const auto res = dmrg_ground_state(inst, opts);
    LanczosOptions lo;
    lo.tol = 1e-11;
    const auto exact = ground_state_lanczos(inst, field, lo);
    worst_e = std::max(worst_e, std::abs(res.energy - exact.energy));
    const auto md = mps_magnetizations_z(res.mps);
    const auto me = magnetizations_z(exact.state);
    for (int i = 0; i < n; ++i) {
      const double e = me[static_cast<std::size_t>(i)];
      if (std::abs(e) <= 1e-6) continue;
      ++sites;
      if ((e > 0.0) != (md[static_cast<std::size_t>(i)] > 0.0)) ++sign_bad;
    }
  }
  const double t = seconds_since(t0);
  return {worst_e <= 1e-8 && sign_bad == 0 && t < 600.0,
          fmt("50 instances N=8..16 chi=64, max |dE|=%.2e, sign mismatches=%d of %d sites, %.1fs", worst_e, sign_bad,
              sites, t)};
}

// ---- 4, 5: ladder sweeps ----

SweepConfig ladder_config(double gamma) {
  SweepConfig cfg;
  cfg.fields = grid_range(0.0, 2.0, 0.1);
  cfg.n_realizations = 300;
  cfg.n_sites = 16;
  cfg.sigma = 1.0;
  cfg.gamma = gamma;
  cfg.master_seed = 0;
  return cfg;
}

OverlapCurve run_ladder(const SweepConfig& cfg, const fs::path& records) {
  fs::remove(records);
  SweepIo io;
  io.records_csv = records;
  return run_sweep(cfg, io);
}

Outcome ladder_peak() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepConfig cfg = ladder_config(0.4);
  const fs::path records = workdir / "ladder_gamma0.4_records.csv";
  const auto curve = run_ladder(cfg, records);
  write_curve_csv(curve, workdir / "ladder_gamma0.4_curve.csv");
  const double t = seconds_since(t0);

  // paired differences M_k(field) - M_k(0) over realizations with both values
  const auto recs = read_records_csv(records);
  std::map<int, std::map<double, double>> by_real;
  for (const auto& r : recs)
    if (r.status != SolverStatus::Failed) by_real[r.realization][r.field] = r.overlap;
  double best_z = -INFINITY, best_field = 0.0, best_diff = 0.0, best_se = 0.0;
  for (std::size_t g = 1; g + 1 < cfg.fields.size(); ++g) {
    std::vector<double> d;
    for (const auto& [k, row] : by_real) {
      auto a = row.find(cfg.fields[g]), b = row.find(cfg.fields[0]);
      if (a != row.end() && b != row.end()) d.push_back(a->second - b->second);
    }
    if (d.size() < 2) continue;
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
    const double z = se > 0.0 ? mean / se : (mean > 0.0 ? INFINITY : -INFINITY);
    if (z > best_z) {
      best_z = z;
      best_field = cfg.fields[g];
      best_diff = mean;
      best_se = se;
    }
  }
  const bool pass = best_diff > 2.0 * best_se && t < 1800.0;
  return {pass, fmt("N=16 R=300 seed=0: best interior field %.1f, M-M(0)=%.5f, paired stderr=%.5f (z=%.2f), "
                    "M(0)=%.5f, failed=%d, %.1fs",
                    best_field, best_diff, best_se, best_z, curve.points[0].mean, curve.total_failed(), t)};
}

Outcome ladder_noise_free() {
  const auto t0 = std::chrono::steady_clock::now();
  const SweepConfig cfg = ladder_config(0.0);
  const auto curve = run_ladder(cfg, workdir / "ladder_gamma0_records.csv");
  write_curve_csv(curve, workdir / "ladder_gamma0_curve.csv");
  const auto opt = find_gamma_opt(curve);
  return {curve.points[0].mean == 1.0 && opt.field == 0.0,
          fmt("M(0)=%.17g, gamma_opt=%g (boundary=%d), M(0.1)=%.5f, %.1fs", curve.points[0].mean, opt.field,
              opt.at_boundary ? 1 : 0, curve.points[1].mean, seconds_since(t0))};
}

// ---- 6-9: mean field ----

MeanFieldParams fig_params(double sigma) {
  MeanFieldParams p;
  p.sigma = sigma;
  p.j0 = 1.0;
  p.beta0 = p.beta = 30.0;
  return p;
}

const QuadratureSpec kQuad{};

struct MfCache {
  std::optional<MfGammaOpt> fig4;
  std::vector<MfGammaOpt> fig5;
  double fig4_seconds = 0.0, fig5_seconds = 0.0;
};
MfCache cache;

const MfGammaOpt& fig4_row() {
  if (!cache.fig4) {
    const auto t0 = std::chrono::steady_clock::now();
    auto rows = find_gamma_opt_mf(fig_params(0.5), std::vector<double>{0.75}, grid_range(0.05, 2.0, 0.05), kQuad);
    cache.fig4 = std::move(rows[0]);
    cache.fig4_seconds = seconds_since(t0);
    write_mf_csv(cache.fig4->sweep.points, workdir / "mf_fig4.csv");
  }
  return *cache.fig4;
}

const std::vector<MfGammaOpt>& fig5_rows() {
  if (cache.fig5.empty()) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> gammas{0.2, 0.4, 0.6, 0.8, 1.0};
    for (double sigma : {0.0, 0.5}) {
      auto rows = find_gamma_opt_mf(fig_params(sigma), gammas, grid_range(0.02, 2.0, 0.02), kQuad);
      for (auto& r : rows) {
        write_mf_csv(r.sweep.points, workdir / fmt("mf_fig5_sigma%.1f_gamma%.1f.csv", sigma, r.gamma_noise));
        cache.fig5.push_back(std::move(r));
      }
    }
    cache.fig5_seconds = seconds_since(t0);
  }
  return cache.fig5;
}

Outcome fig4() {
  const auto& row = fig4_row();
  const auto& pts = row.sweep.points;
  double rsb_edge = -INFINITY;
  for (const auto& p : pts)
    if (p.rsb_warning) rsb_edge = std::max(rsb_edge, p.field);
  int increases = 0, checked = 0;
  const MfPoint* prev = nullptr;
  for (const auto& p : pts) {
    if (p.field <= rsb_edge || !p.solution.converged) continue;
    ++checked;
    if (prev != nullptr && (p.solution.m > prev->solution.m + 1e-10 || p.solution.q > prev->solution.q + 1e-10))
      ++increases;
    prev = &p;
  }
  const double m_first = pts.front().overlap.overlap, m_last = pts.back().overlap.overlap;
  const bool interior = !row.opt.at_boundary && row.opt.max_overlap > std::max(m_first, m_last);
  return {interior && increases == 0 && row.failed == 0 && cache.fig4_seconds < 300.0,
          fmt("gamma_opt=%.4f M_max=%.4f (M(0.05)=%.4f, M(2)=%.4f), RSB warning up to field %.2f, "
              "%d points above it with %d increases of m or q, failed=%d, %.1fs",
              row.opt.field, row.opt.max_overlap, m_first, m_last, rsb_edge, checked, increases, row.failed,
              cache.fig4_seconds)};
}

Outcome fig5() {
  const auto& rows = fig5_rows();
  std::string detail;
  bool pass = cache.fig5_seconds < 1800.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double sigma = i < 5 ? 0.0 : 0.5;
    const double target = sigma * sigma + rows[i].gamma_noise * rows[i].gamma_noise;
    const double rel = (rows[i].opt.field - target) / target;
    const bool ok = std::isfinite(rel) && std::abs(rel) <= 0.25;
    pass = pass && ok && rows[i].failed == 0;
    detail += fmt("\n    sigma=%.1f gamma=%.1f: gamma_opt=%.4f target=%.4f rel=%+.3f M_max=%.4f failed=%d %s", sigma,
                  rows[i].gamma_noise, rows[i].opt.field, target, rel, rows[i].opt.max_overlap, rows[i].failed,
                  ok ? "ok" : "OUT");
  }
  return {pass, fmt("%.1fs", cache.fig5_seconds) + detail};
}

Outcome stationarity() {
  std::vector<std::pair<MeanFieldParams, const MfPoint*>> points;
  auto add = [&](const MfGammaOpt& row, double sigma) {
    for (const auto& p : row.sweep.points) {
      if (!p.solution.converged) continue;
      MeanFieldParams mp = fig_params(sigma);
      mp.gamma = row.gamma_noise;
      mp.field = p.field;
      points.emplace_back(mp, &p);
    }
  };
  add(fig4_row(), 0.5);
  const auto& rows = fig5_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) add(rows[i], i < 5 ? 0.0 : 0.5);

  const auto t0 = std::chrono::steady_clock::now();
  double worst_res = 0.0, worst_grad = 0.0;
  int bad = 0;
  const double h = 1e-5;
  for (const auto& [p, pt] : points) {
    const auto& s = pt->solution;
    const auto o = original_rhs(p, kQuad, s.m0, s.q0);
    const auto n = noisy_rhs(p, kQuad, s.m, s.q, s.r);
    const double res = std::max({std::abs(o.m0 - s.m0), std::abs(o.q0 - s.q0), std::abs(n.m - s.m),
                                 std::abs(n.q - s.q), std::abs(n.r - s.r)});
    const double x[5] = {s.m0, s.q0, s.m, s.q, s.r};
    double grad = 0.0;
    for (int k = 0; k < 5; ++k) {
      auto f = [&](double dx) {
        double y[5] = {x[0], x[1], x[2], x[3], x[4]};
        y[k] += dx;
        return free_energy(p, kQuad, y[0], y[1], y[2], y[3], y[4]);
      };
      const bool edge = (k == 1 && x[1] < h) || (k == 3 && x[3] < h) || (k == 4 && x[4] - x[3] < h);
      const double g = edge ? (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h) : (f(h) - f(-h)) / (2.0 * h);
      grad = std::max(grad, std::abs(g));
    }
    worst_res = std::max(worst_res, res);
    worst_grad = std::max(worst_grad, grad);
    if (!(res < 1e-8) || !(grad < 1e-4)) ++bad;
  }
  return {bad == 0 && !points.empty(),
          fmt("%zu converged points, max residual=%.2e, max |grad -[f]|=%.2e, violations=%d, %.1fs", points.size(),
              worst_res, worst_grad, bad, seconds_since(t0))};
}

Outcome zero_field() {
  const double sets[][3] = {{0.5, 0.75, 30.0}, {0.0, 0.4, 30.0}, {0.5, 0.2, 30.0}, {0.5, 1.0, 30.0},
                            {0.0, 1.0, 10.0},  {0.3, 0.3, 5.0},  {1.0, 0.5, 2.0}};
  double worst_r = 0.0, worst_mq = 0.0;
  int n = 0;
  for (const auto& s : sets) {
    MeanFieldParams p = fig_params(s[0]);
    p.gamma = s[1];
    p.beta = s[2];
    p.field = 0.0;
    const auto sol = solve_noisy(p, kQuad);
    if (!sol.converged) return {false, fmt("solve_noisy did not converge at sigma=%g gamma=%g beta=%g", s[0], s[1], s[2])};
    const auto ref = oracle::classical_rs_sk(p.noisy_sd(), p.j0, p.beta);
    worst_r = std::max(worst_r, std::abs(sol.r - 1.0));
    worst_mq = std::max({worst_mq, std::abs(sol.m - ref.m), std::abs(sol.q - ref.q)});
    ++n;
  }
  return {worst_r <= 1e-9 && worst_mq <= 1e-8,
          fmt("%d parameter sets, max |r-1|=%.2e, max |(m,q) - bisection|=%.2e", n, worst_r, worst_mq)};
}

// ---- 10: reruns from manifests ----

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("\"") + TFINFER_CLI_PATH + "\" " + args + " --quiet > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.find("manifest") != std::string::npos) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[name] = ss.str();
  }
  return out;
}

Outcome determinism() {
  const fs::path root = workdir / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path log = root / "log.txt";
  struct Run {
    std::string name, command, args, manifest;
  };
  const std::vector<Run> runs{
      {"gen", "gen", "-n 40 --sigma 1 --gamma 0.4 --seed 17 -o " + (root / "gen" / "instance.json").string(),
       (root / "gen" / "instance.json.manifest.json").string()},
      {"lanczos", "ladder-sweep", "-n 10 --realizations 8 --fields 0:0.25:2 --seed 5 --out-dir " + (root / "lanczos").string(),
       (root / "lanczos" / "manifest.json").string()},
      {"dmrg", "ladder-sweep",
       "-n 12 --realizations 3 --fields 0:0.5:2 --seed 6 --solver dmrg --chi 24 --out-dir " +
           (root / "dmrg").string(),
       (root / "dmrg" / "manifest.json").string()},
      {"mf-sweep", "mf-sweep",
       "--sigma 0.5 --gammas 0.4,0.75 --fields 0.1:0.1:2 --beta 20 --beta0 20 --out-dir " +
           (root / "mf").string(),
       (root / "mf" / "manifest.json").string()},
  };
  std::string detail;
  bool pass = true;
  for (const auto& run : runs) {
    const fs::path dir = fs::path(run.manifest).parent_path();
    fs::create_directories(dir);
    const bool threaded = run.command != "gen";
    if (cli(run.command + " " + run.args + (threaded ? " --workers 1" : ""), log) != 0) {
      pass = false;
      detail += " " + run.name + ": first run failed;";
      continue;
    }
    const auto first = snapshot(dir);
    const fs::path saved = root / (run.name + ".manifest.json");
    fs::copy_file(run.manifest, saved, fs::copy_options::overwrite_existing);
    for (const auto& e : fs::directory_iterator(dir)) fs::remove(e.path());
    if (cli(run.command + " --config " + saved.string() + (threaded ? " --workers 3" : ""), log) != 0) {
      pass = false;
      detail += " " + run.name + ": rerun failed;";
      continue;
    }
    const auto second = snapshot(dir);
    const bool same = first == second && !first.empty();
    pass = pass && same;
    detail += fmt(" %s: %zu files %s;", run.name.c_str(), first.size(), same ? "identical" : "DIFFER");
  }
  if (!detail.empty()) detail.pop_back();
  return {pass, "first run vs manifest rerun (sweeps with 1 then 3 workers):" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only, expect_fail;
  std::string dir = "acceptance_work", report;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "criteria known not to hold")->delimiter(',');
  app.add_option("--workdir", dir, "scratch and output directory");
  app.add_option("--report", report, "also write the summary here");
  CLI11_PARSE(app, argc, argv);

  workdir = dir;
  fs::create_directories(workdir);
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"classical oracle equivalence", classical_oracle},
      {"quantum oracle equivalence", quantum_oracle},
      {"DMRG validation", dmrg_oracle},
      {"ladder peak existence", ladder_peak},
      {"noise-free ladder sweep", ladder_noise_free},
      {"mean-field overlap peak", fig4},
      {"mean-field gamma_opt tracks sigma^2+gamma^2", fig5},
      {"self-consistency and stationarity", stationarity},
      {"zero-field limit", zero_field},
      {"manifest reruns are byte-identical", determinism},
  };

  std::ostringstream summary;
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const bool xfail = expected.count(id) > 0;
    if (!out.pass && !xfail) ++unexpected;
    const char* verdict = out.pass ? (xfail ? "PASS (listed as expected failure)" : "PASS")
                                   : (xfail ? "FAIL (expected)" : "FAIL");
    const std::string line = fmt("criterion %2d %-45s %s [%.1fs] ", id, criteria[i].first.c_str(), verdict,
                                 seconds_since(t0)) +
                             out.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    summary << line << '\n';
  }
  if (!report.empty()) std::ofstream(report) << summary.str();
  return unexpected == 0 ? 0 : 1;
}
