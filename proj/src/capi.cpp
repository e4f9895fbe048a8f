#include "tfinfer/tfinfer.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tfinfer/disorder.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/ladder_classical.hpp"
#include "tfinfer/meanfield_sk.hpp"
#include "tfinfer/mps_dmrg.hpp"
#include "tfinfer/overlap.hpp"
#include "tfinfer/quantum_exact.hpp"

#ifndef TFINFER_VERSION
#define TFINFER_VERSION "unknown"
#endif

struct tfi_instance {
  tfinfer::LadderInstance inst;
};

struct tfi_curve {
  tfinfer::OverlapCurve curve;
};

namespace {

using tfinfer::ErrorCode;
using tfinfer::fail;
using json = nlohmann::ordered_json;

thread_local std::string last_error;

tfi_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return TFI_ERR_INVALID_ARGUMENT;
    case ErrorCode::InvalidSize: return TFI_ERR_INVALID_SIZE;
    case ErrorCode::Dimension: return TFI_ERR_DIMENSION;
    case ErrorCode::SizeLimit: return TFI_ERR_SIZE_LIMIT;
    case ErrorCode::Domain: return TFI_ERR_DOMAIN;
    case ErrorCode::Parse: return TFI_ERR_PARSE;
    case ErrorCode::Io: return TFI_ERR_IO;
    case ErrorCode::Convergence: return TFI_ERR_CONVERGENCE;
    case ErrorCode::Numerical: return TFI_ERR_NUMERICAL;
    case ErrorCode::InsufficientData: return TFI_ERR_INSUFFICIENT_DATA;
  }
  return TFI_ERR_INTERNAL;
}

template <class F>
tfi_status guarded(F&& body) {
  try {
    body();
    return TFI_OK;
  } catch (const tfinfer::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    last_error = e.what();
    return TFI_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TFI_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TFI_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return TFI_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_object(const char* text, const char* what) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string(what) + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Parse, std::string(what) + " must be a JSON object");
  return j;
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) fail(ErrorCode::Parse, "unknown key '" + item.key() + "' in " + where);
  }
}

std::vector<double> grid_from_json(const json& j, const char* what) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) {
    reject_unknown(j, {"start", "stop", "step"}, what);
    return tfinfer::grid_range(j.at("start").get<double>(), j.at("stop").get<double>(), j.at("step").get<double>());
  }
  fail(ErrorCode::Parse, std::string(what) + " must be a number, an array or {start, stop, step}");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_spins(const tfinfer::SpinConfiguration& c, int* spins) {
  if (spins == nullptr) return;
  for (std::size_t i = 0; i < c.size(); ++i) spins[i] = c[i];
}

// Mean-field request: model parameters, one or more noise levels and fields,
// and optional quadrature and solver sections.
struct MfRequest {
  tfinfer::MeanFieldParams params;
  std::vector<double> gammas;
  std::vector<double> fields;
  tfinfer::QuadratureSpec quad;
  tfinfer::SolveOptions options;
};

MfRequest parse_mf_request(const char* text) {
  const json j = parse_object(text, "mean-field request");
  reject_unknown(j, {"sigma", "gamma", "gammas", "j0", "beta0", "beta", "field", "fields", "quadrature", "solver"},
                 "mean-field request");
  MfRequest r;
  if (j.contains("sigma")) r.params.sigma = j["sigma"].get<double>();
  if (j.contains("j0")) r.params.j0 = j["j0"].get<double>();
  if (j.contains("beta0")) r.params.beta0 = j["beta0"].get<double>();
  if (j.contains("beta")) r.params.beta = j["beta"].get<double>();
  if (j.contains("gamma") && j.contains("gammas")) fail(ErrorCode::Parse, "give either 'gamma' or 'gammas'");
  if (j.contains("field") && j.contains("fields")) fail(ErrorCode::Parse, "give either 'field' or 'fields'");
  r.gammas = j.contains("gammas") ? grid_from_json(j["gammas"], "'gammas'")
                                  : std::vector<double>{j.value("gamma", r.params.gamma)};
  r.fields = j.contains("fields") ? grid_from_json(j["fields"], "'fields'")
                                  : std::vector<double>{j.value("field", r.params.field)};
  r.params.gamma = r.gammas.front();
  r.params.field = r.fields.front();
  if (j.contains("quadrature")) {
    const auto& q = j["quadrature"];
    reject_unknown(q, {"kind", "outer", "inner"}, "quadrature section");
    if (q.contains("kind")) {
      const auto kind = q["kind"].get<std::string>();
      if (kind == "stretched_legendre")
        r.quad.kind = tfinfer::QuadratureSpec::Kind::StretchedLegendre;
      else if (kind == "gauss_hermite")
        r.quad.kind = tfinfer::QuadratureSpec::Kind::GaussHermite;
      else
        fail(ErrorCode::Parse, "unknown quadrature kind '" + kind + "'");
    }
    if (q.contains("outer")) r.quad.n_nodes_outer = q["outer"].get<int>();
    if (q.contains("inner")) r.quad.n_nodes_inner = q["inner"].get<int>();
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    reject_unknown(s, {"tol_original", "tol_noisy", "max_iterations", "damping", "paramagnetic_candidates"},
                   "solver section");
    if (s.contains("tol_original")) r.options.tol_original = s["tol_original"].get<double>();
    if (s.contains("tol_noisy")) r.options.tol_noisy = s["tol_noisy"].get<double>();
    if (s.contains("max_iterations")) r.options.max_iterations = s["max_iterations"].get<int>();
    if (s.contains("damping")) r.options.damping = s["damping"].get<double>();
    if (s.contains("paramagnetic_candidates"))
      r.options.paramagnetic_candidates = s["paramagnetic_candidates"].get<bool>();
  }
  if (!(r.options.tol_original > 0.0) || !(r.options.tol_noisy > 0.0) || r.options.max_iterations < 1 ||
      !(r.options.damping > 0.0 && r.options.damping <= 1.0))
    fail(ErrorCode::InvalidArgument, "invalid mean-field solver options");
  r.params.validate();
  r.quad.validate();
  return r;
}

json mf_request_to_json(const MfRequest& r, bool single) {
  json j;
  j["sigma"] = r.params.sigma;
  j["j0"] = r.params.j0;
  j["beta0"] = r.params.beta0;
  j["beta"] = r.params.beta;
  if (single) {
    j["gamma"] = r.gammas.front();
    j["field"] = r.fields.front();
  } else {
    j["gammas"] = r.gammas;
    j["fields"] = r.fields;
  }
  j["quadrature"] = {
      {"kind", r.quad.kind == tfinfer::QuadratureSpec::Kind::GaussHermite ? "gauss_hermite" : "stretched_legendre"},
      {"outer", r.quad.n_nodes_outer},
      {"inner", r.quad.n_nodes_inner}};
  j["solver"] = {{"tol_original", r.options.tol_original},
                 {"tol_noisy", r.options.tol_noisy},
                 {"max_iterations", r.options.max_iterations},
                 {"damping", r.options.damping},
                 {"paramagnetic_candidates", r.options.paramagnetic_candidates}};
  return j;
}

tfinfer::DmrgOptions parse_dmrg_options(const char* text, double field) {
  tfinfer::DmrgOptions opts;
  opts.schedule = tfinfer::AnnealSchedule::defaults(field);
  if (text == nullptr) return opts;
  const json j = parse_object(text, "DMRG options");
  reject_unknown(j,
                 {"chi", "max_sweeps", "energy_tol", "svd_cutoff", "local_tol", "anneal_start", "anneal_steps",
                  "interpolation", "seed", "checkpoint"},
                 "DMRG options");
  if (j.contains("chi")) opts.chi = j["chi"].get<int>();
  if (j.contains("max_sweeps")) opts.max_sweeps = j["max_sweeps"].get<int>();
  if (j.contains("energy_tol")) opts.energy_tol = j["energy_tol"].get<double>();
  if (j.contains("svd_cutoff")) opts.svd_cutoff = j["svd_cutoff"].get<double>();
  if (j.contains("local_tol")) opts.local_tol = j["local_tol"].get<double>();
  if (j.contains("anneal_start")) opts.schedule.field_start = j["anneal_start"].get<double>();
  if (j.contains("anneal_steps")) opts.schedule.n_steps = j["anneal_steps"].get<int>();
  if (j.contains("interpolation")) {
    const auto kind = j["interpolation"].get<std::string>();
    if (kind == "geometric")
      opts.schedule.interpolation = tfinfer::AnnealSchedule::Interpolation::Geometric;
    else if (kind == "linear")
      opts.schedule.interpolation = tfinfer::AnnealSchedule::Interpolation::Linear;
    else
      fail(ErrorCode::Parse, "unknown interpolation '" + kind + "'");
  }
  if (j.contains("seed")) opts.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("checkpoint")) opts.checkpoint = j["checkpoint"].get<std::string>();
  return opts;
}

json solution_json(const tfinfer::MeanFieldParams& p, const tfinfer::QuadratureSpec& quad,
                   const tfinfer::MeanFieldSolution& s, const tfinfer::NoisySolution& noisy) {
  json j;
  j["sigma"] = p.sigma;
  j["gamma"] = p.gamma;
  j["j0"] = p.j0;
  j["beta0"] = p.beta0;
  j["beta"] = p.beta;
  j["field"] = p.field;
  j["m0"] = s.m0;
  j["q0"] = s.q0;
  j["m"] = s.m;
  j["q"] = s.q;
  j["r"] = s.r;
  j["residual"] = s.residual;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["replicon"] = noisy.replicon;
  j["projections"] = noisy.projections;
  if (s.converged) {
    const auto ov = tfinfer::overlap_mf(p, quad, s);
    j["original_factor"] = ov.original_factor;
    j["noisy_factor"] = ov.noisy_factor;
    j["overlap"] = ov.overlap;
    j["noisy_margin"] = number_or_null(ov.noisy_margin);
    j["free_energy"] = tfinfer::free_energy(p, quad, s);
  } else {
    j["overlap"] = nullptr;
  }
  j["rsb_warning"] = noisy.replicon > 1.0 || noisy.projections > 0;
  return j;
}

}  // namespace

extern "C" {

const char* tfi_version(void) { return TFINFER_VERSION; }

const char* tfi_status_name(tfi_status status) {
  switch (status) {
    case TFI_OK: return "ok";
    case TFI_ERR_INVALID_ARGUMENT: return "invalid argument";
    case TFI_ERR_INVALID_SIZE: return "invalid size";
    case TFI_ERR_DIMENSION: return "dimension mismatch";
    case TFI_ERR_SIZE_LIMIT: return "size limit exceeded";
    case TFI_ERR_DOMAIN: return "domain error";
    case TFI_ERR_PARSE: return "parse error";
    case TFI_ERR_IO: return "I/O error";
    case TFI_ERR_CONVERGENCE: return "convergence failure";
    case TFI_ERR_NUMERICAL: return "numerical error";
    case TFI_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case TFI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tfi_last_error(void) { return last_error.c_str(); }

void tfi_string_free(char* s) { std::free(s); }

tfi_status tfi_instance_generate(int n_sites, double sigma, double gamma, uint64_t seed, tfi_instance** out) {
  return guarded([&] {
    require(out, "out");
    *out = new tfi_instance{tfinfer::generate_instance(n_sites, sigma, gamma, seed)};
  });
}

tfi_status tfi_instance_load(const char* path, tfi_instance** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new tfi_instance{tfinfer::load_instance(path)};
  });
}

tfi_status tfi_instance_from_json(const char* text, tfi_instance** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new tfi_instance{tfinfer::instance_from_json(text)};
  });
}

tfi_status tfi_instance_save(const tfi_instance* inst, const char* path) {
  return guarded([&] {
    require(inst, "instance");
    require(path, "path");
    tfinfer::save_instance(inst->inst, path);
  });
}

tfi_status tfi_instance_to_json(const tfi_instance* inst, char** out) {
  return guarded([&] {
    require(inst, "instance");
    require(out, "out");
    *out = copy_string(tfinfer::instance_to_json(inst->inst));
  });
}

void tfi_instance_free(tfi_instance* inst) { delete inst; }

int tfi_instance_n_sites(const tfi_instance* inst) { return inst == nullptr ? 0 : inst->inst.n_sites; }

tfi_status tfi_instance_couplings(const tfi_instance* inst, double* j3, double* j2, double* xi3, double* xi2) {
  return guarded([&] {
    require(inst, "instance");
    const auto& i = inst->inst;
    auto copy = [](const std::vector<double>& v, double* dst) {
      if (dst != nullptr) std::copy(v.begin(), v.end(), dst);
    };
    copy(i.j3, j3);
    copy(i.j2, j2);
    copy(i.xi3, xi3);
    copy(i.xi2, xi2);
  });
}

tfi_status tfi_classical_ground_state(const tfi_instance* inst, int noisy, int* spins, double* energy) {
  return guarded([&] {
    require(inst, "instance");
    const auto& i = inst->inst;
    const auto gs = noisy ? tfinfer::viterbi_ground_state(i.noisy_j3(), i.noisy_j2())
                          : tfinfer::viterbi_ground_state(i.j3, i.j2);
    write_spins(gs.config, spins);
    if (energy != nullptr) *energy = gs.energy;
  });
}

tfi_status tfi_quantum_ground_state(const tfi_instance* inst, double field, double tol, int max_iter, double* energy,
                                    double* magnetizations, int* spins, int* flagged) {
  return guarded([&] {
    require(inst, "instance");
    tfinfer::LanczosOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    const auto gs = tfinfer::ground_state_lanczos(inst->inst, field, opts);
    const auto mags = tfinfer::magnetizations_z(gs.state);
    const auto inferred = tfinfer::inferred_configuration(mags);
    if (energy != nullptr) *energy = gs.energy;
    if (magnetizations != nullptr) std::copy(mags.begin(), mags.end(), magnetizations);
    write_spins(inferred.config, spins);
    if (flagged != nullptr) *flagged = static_cast<int>(std::count(inferred.flagged.begin(), inferred.flagged.end(), true));
  });
}

tfi_status tfi_dmrg_ground_state(const tfi_instance* inst, double field, const char* options_json, double* energy,
                                 double* magnetizations, int* spins) {
  return guarded([&] {
    require(inst, "instance");
    auto opts = parse_dmrg_options(options_json, field);
    opts.schedule.field_target = field;
    const auto result = tfinfer::dmrg_ground_state(inst->inst, opts);
    const auto mags = tfinfer::mps_magnetizations_z(result.mps);
    if (energy != nullptr) *energy = result.energy;
    if (magnetizations != nullptr) std::copy(mags.begin(), mags.end(), magnetizations);
    write_spins(tfinfer::inferred_configuration(mags).config, spins);
  });
}

tfi_status tfi_sweep_run(const char* config_json, const char* records_csv, int resume, int workers,
                         tfi_progress_fn progress, void* user, tfi_curve** out) {
  return guarded([&] {
    require(config_json, "config");
    require(out, "out");
    const auto cfg = tfinfer::sweep_config_from_json(config_json);
    tfinfer::SweepIo io;
    if (records_csv != nullptr) io.records_csv = records_csv;
    io.resume = resume != 0;
    io.workers = workers;
    if (progress != nullptr) io.progress = [&](int k, int done, int total) { progress(k, done, total, user); };
    *out = new tfi_curve{tfinfer::run_sweep(cfg, io)};
  });
}

tfi_status tfi_curve_from_records(const char* config_json, const char* records_csv, tfi_curve** out) {
  return guarded([&] {
    require(config_json, "config");
    require(records_csv, "records path");
    require(out, "out");
    const auto cfg = tfinfer::sweep_config_from_json(config_json);
    *out = new tfi_curve{tfinfer::aggregate_records(cfg, tfinfer::read_records_csv(records_csv))};
  });
}

void tfi_curve_free(tfi_curve* curve) { delete curve; }

int tfi_curve_size(const tfi_curve* curve) {
  return curve == nullptr ? 0 : static_cast<int>(curve->curve.points.size());
}

tfi_status tfi_curve_point(const tfi_curve* curve, int index, double* field, double* mean, double* stderr_mean, int* n,
                           double* flagged_rate, int* failed) {
  return guarded([&] {
    require(curve, "curve");
    if (index < 0 || index >= tfi_curve_size(curve)) fail(ErrorCode::InvalidArgument, "curve index out of range");
    const auto& p = curve->curve.points[static_cast<std::size_t>(index)];
    if (field != nullptr) *field = p.field;
    if (mean != nullptr) *mean = p.mean;
    if (stderr_mean != nullptr) *stderr_mean = p.stderr_mean;
    if (n != nullptr) *n = p.n;
    if (flagged_rate != nullptr) *flagged_rate = p.flagged_rate;
    if (failed != nullptr) *failed = p.failed;
  });
}

int tfi_curve_total_failed(const tfi_curve* curve) { return curve == nullptr ? 0 : curve->curve.total_failed(); }

tfi_status tfi_curve_gamma_opt(const tfi_curve* curve, double* field, double* max_overlap, int* at_boundary) {
  return guarded([&] {
    require(curve, "curve");
    const auto opt = tfinfer::find_gamma_opt(curve->curve);
    if (field != nullptr) *field = opt.field;
    if (max_overlap != nullptr) *max_overlap = opt.max_overlap;
    if (at_boundary != nullptr) *at_boundary = opt.at_boundary ? 1 : 0;
  });
}

tfi_status tfi_curve_write_csv(const tfi_curve* curve, const char* path) {
  return guarded([&] {
    require(curve, "curve");
    require(path, "path");
    tfinfer::write_curve_csv(curve->curve, path);
  });
}

tfi_status tfi_curve_metadata_json(const tfi_curve* curve, char** out) {
  return guarded([&] {
    require(curve, "curve");
    require(out, "out");
    *out = copy_string(tfinfer::curve_metadata_json(curve->curve));
  });
}

tfi_status tfi_gamma_opt(const double* fields, const double* values, size_t n, double* field, double* max_overlap,
                         int* at_boundary) {
  return guarded([&] {
    require(fields, "fields");
    require(values, "values");
    const auto opt = tfinfer::find_gamma_opt({fields, n}, {values, n});
    if (field != nullptr) *field = opt.field;
    if (max_overlap != nullptr) *max_overlap = opt.max_overlap;
    if (at_boundary != nullptr) *at_boundary = opt.at_boundary ? 1 : 0;
  });
}

tfi_status tfi_fit_power_law(const double* x, const double* y, size_t n, double* a, double* b, double* residual) {
  return guarded([&] {
    require(x, "x");
    require(y, "y");
    const auto fit = tfinfer::fit_power_law({x, n}, {y, n});
    if (a != nullptr) *a = fit.a;
    if (b != nullptr) *b = fit.b;
    if (residual != nullptr) *residual = fit.residual;
  });
}

tfi_status tfi_mf_solve(const char* request_json, char** result_json) {
  return guarded([&] {
    require(request_json, "request");
    require(result_json, "out");
    const MfRequest req = parse_mf_request(request_json);
    if (req.gammas.size() != 1 || req.fields.size() != 1)
      fail(ErrorCode::InvalidArgument, "mf-solve takes a single gamma and a single field");
    const auto original = tfinfer::solve_original(req.params, req.quad, req.options);
    const auto noisy = tfinfer::solve_noisy(req.params, req.quad, req.options);
    const auto s = tfinfer::combine(original, noisy);
    json out;
    out["request"] = mf_request_to_json(req, true);
    out["solution"] = solution_json(req.params, req.quad, s, noisy);
    *result_json = copy_string(out.dump(2));
  });
}

tfi_status tfi_mf_sweep(const char* request_json, const char* csv_path, int workers, char** summary_json) {
  return guarded([&] {
    require(request_json, "request");
    const MfRequest req = parse_mf_request(request_json);
    const auto rows = tfinfer::find_gamma_opt_mf(req.params, req.gammas, req.fields, req.quad, req.options, workers);
    std::vector<tfinfer::MfPoint> points;
    json summary = json::array();
    for (const auto& row : rows) {
      points.insert(points.end(), row.sweep.points.begin(), row.sweep.points.end());
      json s;
      s["gamma_noise"] = row.gamma_noise;
      s["gamma_opt"] = number_or_null(row.opt.field);
      s["max_overlap"] = number_or_null(row.opt.max_overlap);
      s["at_boundary"] = row.opt.at_boundary;
      s["failed"] = row.failed;
      summary.push_back(s);
    }
    if (csv_path != nullptr) tfinfer::write_mf_csv(points, csv_path);
    if (summary_json != nullptr) {
      json out;
      out["request"] = mf_request_to_json(req, false);
      out["rows"] = summary;
      *summary_json = copy_string(out.dump(2));
    }
  });
}

}  // extern "C"
