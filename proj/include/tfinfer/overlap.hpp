#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tfinfer/ladder_classical.hpp"
#include "tfinfer/mps_dmrg.hpp"
#include "tfinfer/quantum_exact.hpp"

namespace tfinfer {

/// (1/N) sum_i a_i b_i = 1 - 2 * hamming(a, b) / N.
double overlap_single(const SpinConfiguration& a, const SpinConfiguration& b);

enum class SolverKind { Lanczos, Dmrg };
const char* to_string(SolverKind kind) noexcept;
SolverKind solver_kind_from_string(const std::string& name);

/// start, start + step, ... up to stop, each value rounded to 12 decimals so
/// that 0:0.1:2 yields 0.3 rather than 0.30000000000000004.
std::vector<double> grid_range(double start, double stop, double step);

struct SweepConfig {
  std::vector<double> fields{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
                             1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
  int n_realizations = 300;
  int n_sites = 16;
  double sigma = 1.0;
  double gamma = 0.4;
  std::uint64_t master_seed = 0;
  SolverKind solver = SolverKind::Lanczos;
  double lanczos_tol = 1e-10;
  int lanczos_max_iter = 20000;
  int dmrg_chi = 64;
  int dmrg_max_sweeps = 30;
  double dmrg_energy_tol = 1e-10;
  int dmrg_anneal_steps = 8;

  void validate() const;
};

std::string sweep_config_to_json(const SweepConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SweepConfig sweep_config_from_json(const std::string& text);

enum class SolverStatus { Ok, Flagged, Degenerate, Failed };
const char* to_string(SolverStatus status) noexcept;
SolverStatus solver_status_from_string(const std::string& name);

/// One (realization, field) result. Flagged: some |<sigma^z_i>| < 1e-10 and
/// the tie-broken sign was used. Degenerate: the solver's gap estimate is below
/// 1e-10. Failed: the solver threw; the overlap is NaN and the record is
/// excluded from averages.
struct RealizationRecord {
  int realization = 0;
  double field = 0.0;
  double overlap = 0.0;
  SolverStatus status = SolverStatus::Ok;
};

/// All grid points of realization k, in grid order.
std::vector<RealizationRecord> run_realization(const SweepConfig& cfg, int k);

struct CurvePoint {
  double field = 0.0;
  double mean = 0.0;
  double stderr_mean = 0.0;  ///< sample standard deviation / sqrt(n); 0 when n < 2
  int n = 0;                 ///< realizations included
  double flagged_rate = 0.0; ///< fraction of included records that are flagged or degenerate
  int failed = 0;            ///< realizations excluded because the solver failed
};

struct OverlapCurve {
  SweepConfig config;
  std::vector<CurvePoint> points;
  int total_failed() const;
};

/// Aggregates records in realization order regardless of their input order.
OverlapCurve aggregate_records(const SweepConfig& cfg, std::vector<RealizationRecord> records);

struct SweepIo {
  std::filesystem::path records_csv;  ///< empty: records are kept in memory only
  bool resume = false;                ///< reuse complete realizations already in records_csv
  int workers = 1;
  std::function<void(int realization, int done, int total)> progress;
};

/// Disorder-averaged overlap curve. Realizations are independent work items
/// shared across `workers` threads; results do not depend on the worker count.
OverlapCurve run_sweep(const SweepConfig& cfg, const SweepIo& io = {});

void write_records_csv(std::span<const RealizationRecord> records, const std::filesystem::path& path);
std::vector<RealizationRecord> read_records_csv(const std::filesystem::path& path);

void write_curve_csv(const OverlapCurve& curve, const std::filesystem::path& path);
std::string curve_metadata_json(const OverlapCurve& curve);

struct GammaOpt {
  double field = 0.0;
  double max_overlap = 0.0;
  bool at_boundary = false;
};

/// Grid argmax (first occurrence), refined by the vertex of the parabola
/// through the maximum and its two neighbours, clamped to their interval.
GammaOpt find_gamma_opt(std::span<const double> fields, std::span<const double> values);
GammaOpt find_gamma_opt(const OverlapCurve& curve);

struct PowerLawFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  ///< root-mean-square residual in log space
};

/// Least squares fit of y = a * x^b on log-log axes.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace tfinfer
