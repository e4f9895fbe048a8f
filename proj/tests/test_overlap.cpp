#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "tfinfer/disorder.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/overlap.hpp"

using namespace tfinfer;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tfinfer_test_overlap";
  fs::create_directories(dir);
  return dir / name;
}

SweepConfig small_config() {
  SweepConfig cfg;
  cfg.fields = grid_range(0.0, 1.0, 0.25);
  cfg.n_realizations = 6;
  cfg.n_sites = 8;
  cfg.master_seed = 77;
  return cfg;
}

void check_same(const OverlapCurve& a, const OverlapCurve& b) {
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].mean == b.points[i].mean);
    CHECK(a.points[i].stderr_mean == b.points[i].stderr_mean);
    CHECK(a.points[i].n == b.points[i].n);
    CHECK(a.points[i].flagged_rate == b.points[i].flagged_rate);
  }
}

}  // namespace

TEST_CASE("single overlap") {
  const SpinConfiguration a(std::vector<std::int8_t>{1, 1, -1, 1});
  const SpinConfiguration b(std::vector<std::int8_t>{1, -1, -1, -1});
  CHECK(overlap_single(a, a) == 1.0);
  CHECK(overlap_single(a, a.negated()) == -1.0);
  CHECK(overlap_single(a, b) == 0.0);
  CHECK(code_of([&] { overlap_single(a, SpinConfiguration::all_up(3)); }) == ErrorCode::Dimension);
}

TEST_CASE("grid construction") {
  const auto g = grid_range(0.0, 2.0, 0.1);
  CHECK(g.size() == 21);
  CHECK(g[3] == 0.3);
  CHECK(g.back() == 2.0);
  CHECK(grid_range(0.02, 2.0, 0.02).size() == 100);
  CHECK(code_of([] { grid_range(0.0, 1.0, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("gamma_opt locates the peak") {
  const std::vector<double> f{0.0, 1.0, 2.0};
  auto opt = find_gamma_opt(f, std::vector<double>{0.5, 0.8, 0.5});
  CHECK(opt.field == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(opt.max_overlap == doctest::Approx(0.8));
  CHECK_FALSE(opt.at_boundary);

  opt = find_gamma_opt(f, std::vector<double>{0.9, 0.7, 0.4});
  CHECK(opt.field == 0.0);
  CHECK(opt.at_boundary);

  // asymmetric parabola y = 1 - (x - 1.3)^2 sampled on a grid
  const std::vector<double> x{0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> y;
  for (double v : x) y.push_back(1.0 - (v - 1.3) * (v - 1.3));
  opt = find_gamma_opt(x, y);
  CHECK(opt.field == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(opt.max_overlap == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(code_of([&] { find_gamma_opt(std::vector<double>{0, 1}, std::vector<double>{1, 2}); }) ==
        ErrorCode::InsufficientData);
}

TEST_CASE("power-law fit recovers exact laws") {
  std::vector<double> g{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> y1, y2;
  for (double v : g) {
    y1.push_back(0.5 * v * v);
    y2.push_back(1.3 * v);
  }
  auto fit = fit_power_law(g, y1);
  CHECK(std::abs(fit.a - 0.5) < 1e-10);
  CHECK(std::abs(fit.b - 2.0) < 1e-10);
  CHECK(fit.residual < 1e-10);
  fit = fit_power_law(g, y2);
  CHECK(std::abs(fit.a - 1.3) < 1e-10);
  CHECK(std::abs(fit.b - 1.0) < 1e-10);
  y1[0] = 0.0;
  CHECK(code_of([&] { fit_power_law(g, y1); }) == ErrorCode::Domain);
}

TEST_CASE("aggregation ignores record order and skips failures") {
  SweepConfig cfg = small_config();
  cfg.fields = {0.0, 1.0};
  cfg.n_realizations = 3;
  std::vector<RealizationRecord> recs{
      {2, 0.0, 0.5, SolverStatus::Ok},   {0, 0.0, 1.0, SolverStatus::Ok},
      {1, 0.0, 0.75, SolverStatus::Flagged}, {0, 1.0, 0.25, SolverStatus::Ok},
      {1, 1.0, std::nan(""), SolverStatus::Failed}, {2, 1.0, 0.5, SolverStatus::Degenerate}};
  const auto curve = aggregate_records(cfg, recs);
  std::reverse(recs.begin(), recs.end());
  check_same(curve, aggregate_records(cfg, recs));
  CHECK(curve.points[0].mean == doctest::Approx(0.75));
  CHECK(curve.points[0].stderr_mean == doctest::Approx(0.25 / std::sqrt(3.0)));
  CHECK(curve.points[0].flagged_rate == doctest::Approx(1.0 / 3.0));
  CHECK(curve.points[1].n == 2);
  CHECK(curve.points[1].failed == 1);
  CHECK(curve.points[1].flagged_rate == doctest::Approx(0.5));
  CHECK(curve.total_failed() == 1);
}

TEST_CASE("noise-free sweep gives perfect overlap at zero field") {
  SweepConfig cfg = small_config();
  cfg.gamma = 0.0;
  const auto curve = run_sweep(cfg);
  CHECK(curve.points[0].mean == 1.0);
  CHECK(curve.points[0].stderr_mean == 0.0);
  const auto opt = find_gamma_opt(curve);
  CHECK(opt.field == 0.0);
  CHECK(opt.max_overlap == 1.0);
}

TEST_CASE("worker count and resume do not change results") {
  const SweepConfig cfg = small_config();
  const auto serial = run_sweep(cfg);

  SweepIo io;
  io.workers = 3;
  io.records_csv = scratch("records.csv");
  fs::remove(io.records_csv);
  const auto parallel = run_sweep(cfg, io);
  check_same(serial, parallel);

  // Drop the last realization plus a partial line, then resume.
  auto records = read_records_csv(io.records_csv);
  CHECK(records.size() == cfg.fields.size() * 6);
  std::erase_if(records, [](const RealizationRecord& r) { return r.realization == 4; });
  write_records_csv(records, io.records_csv);
  { std::ofstream(io.records_csv, std::ios::app) << "4,0,0.5,o"; }
  io.resume = true;
  int progress_calls = 0;
  io.progress = [&](int, int, int) { ++progress_calls; };
  const auto resumed = run_sweep(cfg, io);
  check_same(serial, resumed);
  CHECK(progress_calls == 1);

  check_same(serial, aggregate_records(cfg, read_records_csv(io.records_csv)));
}

TEST_CASE("DMRG sweep agrees with Lanczos") {
  SweepConfig cfg = small_config();
  cfg.n_realizations = 2;
  const auto exact = run_sweep(cfg);
  cfg.solver = SolverKind::Dmrg;
  cfg.dmrg_chi = 16;
  const auto mps = run_sweep(cfg);
  for (std::size_t i = 0; i < exact.points.size(); ++i)
    CHECK(mps.points[i].mean == doctest::Approx(exact.points[i].mean).epsilon(1e-12));
}

TEST_CASE("records CSV round trip") {
  const std::vector<RealizationRecord> recs{{0, 0.1, 0.125, SolverStatus::Ok},
                                            {1, 0.30000000000000004, -1.0 / 3.0, SolverStatus::Degenerate},
                                            {2, 2.0, std::nan(""), SolverStatus::Failed}};
  const fs::path p = scratch("rt.csv");
  write_records_csv(recs, p);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "realization,gamma_field,overlap,solver_status");
  const auto back = read_records_csv(p);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].realization == recs[i].realization);
    CHECK(back[i].field == recs[i].field);
    CHECK(back[i].overlap == recs[i].overlap);
    CHECK(back[i].status == recs[i].status);
  }
  CHECK(std::isnan(back[2].overlap));
  CHECK(back[2].status == SolverStatus::Failed);
}

TEST_CASE("sweep config JSON") {
  const SweepConfig cfg = small_config();
  const auto back = sweep_config_from_json(sweep_config_to_json(cfg));
  CHECK(back.fields == cfg.fields);
  CHECK(back.master_seed == cfg.master_seed);
  CHECK(back.n_sites == cfg.n_sites);

  const auto ranged = sweep_config_from_json(R"({"fields": {"start": 0, "stop": 2, "step": 0.1}})");
  CHECK(ranged.fields == grid_range(0.0, 2.0, 0.1));
  CHECK(code_of([] { sweep_config_from_json(R"({"n_site": 8})"); }) == ErrorCode::Parse);
  CHECK(code_of([] { sweep_config_from_json("[1, 2]"); }) == ErrorCode::Parse);
  CHECK(code_of([] { sweep_config_from_json(R"({"solver": "qmc"})"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { sweep_config_from_json(R"({"fields": [0.2, 0.1]})").validate(); }) == ErrorCode::InvalidArgument);
}
