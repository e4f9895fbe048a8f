// tfinfer command-line tool. Links only the C API.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tfinfer/tfinfer.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kConvergence = 3, kIo = 4 };

struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_of(tfi_status s) {
  switch (s) {
    case TFI_OK: return kOk;
    case TFI_ERR_INVALID_ARGUMENT:
    case TFI_ERR_INVALID_SIZE:
    case TFI_ERR_DIMENSION:
    case TFI_ERR_SIZE_LIMIT:
    case TFI_ERR_DOMAIN:
    case TFI_ERR_PARSE:
    case TFI_ERR_INSUFFICIENT_DATA: return kConfig;
    case TFI_ERR_CONVERGENCE:
    case TFI_ERR_NUMERICAL: return kConvergence;
    case TFI_ERR_IO: return kIo;
    default: return kOther;
  }
}

void check(tfi_status s) {
  if (s != TFI_OK) throw Failure{exit_code_of(s), std::string(tfi_status_name(s)) + ": " + tfi_last_error()};
}

// Owns a string returned by the library.
std::string take(char* s) {
  std::string out = s == nullptr ? std::string() : std::string(s);
  tfi_string_free(s);
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kIo, "cannot read " + path.string()};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw Failure{kIo, "cannot write " + path.string()};
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Failure{kIo, "cannot write " + path.string() + ": " + ec.message()};
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// A grid flag: "a:step:b", "x,y,z" or a single number.
json parse_grid(const std::string& text) {
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<double> parts;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
      if (parts.size() != 3) throw std::invalid_argument(text);
      return json{{"start", parts[0]}, {"stop", parts[2]}, {"step", parts[1]}};
    }
    json out = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
  } catch (const std::exception&) {
    throw Failure{kConfig, "cannot parse grid '" + text + "' (use start:step:stop or a comma list)"};
  }
}

// The parameters a subcommand starts from: the --config file if given (a
// plain config or a manifest written by an earlier run of the same command).
json load_parameters(const std::string& config_path, const std::string& command) {
  if (config_path.empty()) return json::object();
  json j;
  try {
    j = json::parse(read_file(config_path));
  } catch (const json::parse_error& e) {
    throw Failure{kConfig, config_path + " is not valid JSON: " + e.what()};
  }
  if (!j.is_object()) throw Failure{kConfig, config_path + " must hold a JSON object"};
  if (j.contains("command") && j.contains("parameters")) {
    if (j["command"] != command)
      throw Failure{kConfig, "manifest is for '" + j["command"].get<std::string>() + "', not '" + command + "'"};
    return j["parameters"];
  }
  return j;
}

struct Manifest {
  std::string command;
  json parameters;
  json master_seed = nullptr;
  std::vector<std::string> artifacts;
  int workers = 1;
  std::string started;
  std::chrono::steady_clock::time_point t0;
  json extra = json::object();

  void write(const fs::path& path) const {
    json j;
    j["tool"] = "tfinfer";
    j["version"] = tfi_version();
    j["command"] = command;
    j["parameters"] = parameters;
    j["master_seed"] = master_seed;
    j["artifacts"] = artifacts;
    j["workers"] = workers;
    for (const auto& item : extra.items()) j[item.key()] = item.value();
    j["started_at"] = started;
    j["finished_at"] = utc_now();
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file(path, j.dump(2) + "\n");
  }
};

Manifest start_manifest(const std::string& command, int workers) {
  Manifest m;
  m.command = command;
  m.workers = workers;
  m.started = utc_now();
  m.t0 = std::chrono::steady_clock::now();
  return m;
}

template <class T>
T require_key(const json& p, const char* key, const std::string& command) {
  if (!p.contains(key)) throw Failure{kConfig, command + ": missing parameter '" + key + "'"};
  try {
    return p[key].get<T>();
  } catch (const json::exception&) {
    throw Failure{kConfig, command + ": bad value for '" + key + "'"};
  }
}

// Splits off the keys the tool itself consumes; the rest goes to the library.
json without(json p, std::initializer_list<const char*> keys) {
  for (const char* k : keys) p.erase(k);
  return p;
}

struct Common {
  std::string config;
  std::string manifest;
  int workers = 1;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool with_workers) {
  app->add_option("--config", c.config, "JSON config file, or a manifest from an earlier run");
  app->add_option("--manifest", c.manifest, "where to write the run manifest");
  if (with_workers) app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--quiet", c.quiet, "no progress output");
}

// ---- gen ----

struct GenFlags {
  std::optional<int> n_sites;
  std::optional<double> sigma, gamma;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int run_gen(const Common& c, const GenFlags& f) {
  json p = load_parameters(c.config, "gen");
  if (f.n_sites) p["n_sites"] = *f.n_sites;
  if (f.sigma) p["sigma"] = *f.sigma;
  if (f.gamma) p["gamma"] = *f.gamma;
  if (f.seed) p["seed"] = *f.seed;
  if (f.out) p["out"] = *f.out;
  Manifest m = start_manifest("gen", 1);
  const auto n = require_key<int>(p, "n_sites", "gen");
  const auto sigma = require_key<double>(p, "sigma", "gen");
  const auto gamma = require_key<double>(p, "gamma", "gen");
  const auto seed = require_key<std::uint64_t>(p, "seed", "gen");
  const auto out = require_key<std::string>(p, "out", "gen");

  tfi_instance* inst = nullptr;
  check(tfi_instance_generate(n, sigma, gamma, seed, &inst));
  const tfi_status s = tfi_instance_save(inst, out.c_str());
  tfi_instance_free(inst);
  check(s);

  m.parameters = p;
  m.master_seed = seed;
  m.artifacts = {out};
  m.write(c.manifest.empty() ? fs::path(out + ".manifest.json") : fs::path(c.manifest));
  return kOk;
}

// ---- ladder-sweep ----

struct SweepFlags {
  std::optional<int> n_sites, realizations, chi;
  std::optional<double> sigma, gamma, lanczos_tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> solver, fields, out_dir;
  bool resume = false;
};

void sweep_progress(int k, int done, int total, void*) {
  std::fprintf(stderr, "[ladder-sweep] realization %d finished (%d/%d)\n", k, done, total);
}

int run_ladder_sweep(const Common& c, const SweepFlags& f) {
  json p = load_parameters(c.config, "ladder-sweep");
  if (f.n_sites) p["n_sites"] = *f.n_sites;
  if (f.realizations) p["n_realizations"] = *f.realizations;
  if (f.sigma) p["sigma"] = *f.sigma;
  if (f.gamma) p["gamma"] = *f.gamma;
  if (f.seed) p["master_seed"] = *f.seed;
  if (f.solver) p["solver"] = *f.solver;
  if (f.fields) p["fields"] = parse_grid(*f.fields);
  if (f.lanczos_tol) p["lanczos"]["tol"] = *f.lanczos_tol;
  if (f.chi) p["dmrg"]["chi"] = *f.chi;
  if (f.out_dir) p["out_dir"] = *f.out_dir;
  Manifest m = start_manifest("ladder-sweep", c.workers);
  const fs::path dir = require_key<std::string>(p, "out_dir", "ladder-sweep");
  fs::create_directories(dir);
  const fs::path records = dir / "records.csv";
  const fs::path curve_csv = dir / "curve.csv";
  const fs::path curve_json = dir / "curve.json";

  const std::string config = without(p, {"out_dir"}).dump();
  tfi_curve* curve = nullptr;
  check(tfi_sweep_run(config.c_str(), records.string().c_str(), f.resume ? 1 : 0, c.workers,
                      c.quiet ? nullptr : sweep_progress, nullptr, &curve));
  int failed = 0;
  try {
    check(tfi_curve_write_csv(curve, curve_csv.string().c_str()));
    char* meta_raw = nullptr;
    check(tfi_curve_metadata_json(curve, &meta_raw));
    json meta = json::parse(take(meta_raw));
    double opt = 0.0, best = 0.0;
    int boundary = 0;
    if (tfi_curve_gamma_opt(curve, &opt, &best, &boundary) == TFI_OK)
      meta["gamma_opt"] = {{"field", opt}, {"max_overlap", best}, {"at_boundary", boundary != 0}};
    else
      meta["gamma_opt"] = nullptr;
    write_file(curve_json, meta.dump(2) + "\n");
    failed = tfi_curve_total_failed(curve);
    json resolved = meta["config"];
    resolved["out_dir"] = dir.string();
    m.parameters = resolved;
    m.master_seed = resolved["master_seed"];
  } catch (...) {
    tfi_curve_free(curve);
    throw;
  }
  tfi_curve_free(curve);

  m.artifacts = {curve_csv.string(), records.string(), curve_json.string()};
  m.extra["failed_realizations"] = failed;
  m.write(c.manifest.empty() ? dir / "manifest.json" : fs::path(c.manifest));
  if (failed > 0) {
    std::fprintf(stderr, "ladder-sweep: %d solver failures were excluded from the averages (see %s)\n", failed,
                 curve_json.string().c_str());
    return kConvergence;
  }
  return kOk;
}

// ---- mf-solve / mf-sweep ----

struct MfFlags {
  std::optional<double> sigma, gamma, j0, beta, beta0, field;
  std::optional<int> outer, inner;
  std::optional<std::string> gammas, fields, out, out_dir;
};

void apply_mf_flags(json& p, const MfFlags& f) {
  if (f.sigma) p["sigma"] = *f.sigma;
  if (f.gamma) {
    p.erase("gammas");
    p["gamma"] = *f.gamma;
  }
  if (f.gammas) {
    p.erase("gamma");
    p["gammas"] = parse_grid(*f.gammas);
  }
  if (f.j0) p["j0"] = *f.j0;
  if (f.beta) p["beta"] = *f.beta;
  if (f.beta0) p["beta0"] = *f.beta0;
  if (f.field) {
    p.erase("fields");
    p["field"] = *f.field;
  }
  if (f.fields) {
    p.erase("field");
    p["fields"] = parse_grid(*f.fields);
  }
  if (f.outer) p["quadrature"]["outer"] = *f.outer;
  if (f.inner) p["quadrature"]["inner"] = *f.inner;
}

int run_mf_solve(const Common& c, const MfFlags& f) {
  json p = load_parameters(c.config, "mf-solve");
  apply_mf_flags(p, f);
  if (f.out) p["out"] = *f.out;
  Manifest m = start_manifest("mf-solve", 1);
  const auto out = require_key<std::string>(p, "out", "mf-solve");
  const std::string request = without(p, {"out"}).dump();
  char* raw = nullptr;
  check(tfi_mf_solve(request.c_str(), &raw));
  const json result = json::parse(take(raw));
  write_file(out, result.dump(2) + "\n");
  json resolved = result["request"];
  resolved["out"] = out;
  m.parameters = resolved;
  m.artifacts = {out};
  m.write(c.manifest.empty() ? fs::path(out + ".manifest.json") : fs::path(c.manifest));
  if (!result["solution"]["converged"].get<bool>()) {
    std::fprintf(stderr, "mf-solve: the self-consistent equations did not converge (residual %g)\n",
                 result["solution"]["residual"].get<double>());
    return kConvergence;
  }
  return kOk;
}

int run_mf_sweep(const Common& c, const MfFlags& f) {
  json p = load_parameters(c.config, "mf-sweep");
  apply_mf_flags(p, f);
  if (f.out_dir) p["out_dir"] = *f.out_dir;
  Manifest m = start_manifest("mf-sweep", c.workers);
  const fs::path dir = require_key<std::string>(p, "out_dir", "mf-sweep");
  fs::create_directories(dir);
  const fs::path points_csv = dir / "mf.csv";
  const fs::path opt_csv = dir / "gamma_opt.csv";
  const std::string request = without(p, {"out_dir"}).dump();
  if (!c.quiet) std::fprintf(stderr, "[mf-sweep] solving\n");
  char* raw = nullptr;
  check(tfi_mf_sweep(request.c_str(), points_csv.string().c_str(), c.workers, &raw));
  const json summary = json::parse(take(raw));

  std::string text = "gamma_noise,gamma_opt,max_overlap,at_boundary,failed\n";
  int failed = 0;
  auto num = [](const json& v) { return v.is_null() ? std::string("nan") : fmt(v.get<double>()); };
  for (const auto& row : summary["rows"]) {
    text += fmt(row["gamma_noise"].get<double>()) + "," + num(row["gamma_opt"]) + "," + num(row["max_overlap"]) + "," +
            (row["at_boundary"].get<bool>() ? "1" : "0") + "," + std::to_string(row["failed"].get<int>()) + "\n";
    failed += row["failed"].get<int>();
    if (!c.quiet)
      std::fprintf(stderr, "[mf-sweep] gamma=%s gamma_opt=%s\n", fmt(row["gamma_noise"].get<double>()).c_str(),
                   num(row["gamma_opt"]).c_str());
  }
  write_file(opt_csv, text);

  json resolved = summary["request"];
  resolved["out_dir"] = dir.string();
  m.parameters = resolved;
  m.artifacts = {points_csv.string(), opt_csv.string()};
  m.extra["failed_points"] = failed;
  m.write(c.manifest.empty() ? dir / "manifest.json" : fs::path(c.manifest));
  if (failed > 0) {
    std::fprintf(stderr, "mf-sweep: %d grid points did not converge and were excluded\n", failed);
    return kConvergence;
  }
  return kOk;
}

// ---- fit ----

struct FitFlags {
  std::optional<std::string> input, out, x_column, y_column;
};

int run_fit(const Common& c, const FitFlags& f) {
  json p = load_parameters(c.config, "fit");
  if (f.input) p["input"] = *f.input;
  if (f.out) p["out"] = *f.out;
  if (f.x_column) p["x_column"] = *f.x_column;
  if (f.y_column) p["y_column"] = *f.y_column;
  if (!p.contains("x_column")) p["x_column"] = "gamma_noise";
  if (!p.contains("y_column")) p["y_column"] = "gamma_opt";
  Manifest m = start_manifest("fit", 1);
  const auto input = require_key<std::string>(p, "input", "fit");
  const auto out = require_key<std::string>(p, "out", "fit");
  const auto xname = require_key<std::string>(p, "x_column", "fit");
  const auto yname = require_key<std::string>(p, "y_column", "fit");

  std::istringstream in(read_file(input));
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw Failure{kConfig, input + " is empty"};
  const auto header = split(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Failure{kConfig, input + " has no column '" + name + "'"};
  };
  const std::size_t xi = column(xname), yi = column(yname);
  std::vector<double> xs, ys;
  int skipped = 0, row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw Failure{kConfig, input + ": row " + std::to_string(row) + " is ragged"};
    double x = 0.0, y = 0.0;
    try {
      x = std::stod(cells[xi]);
      y = std::stod(cells[yi]);
    } catch (const std::exception&) {
      throw Failure{kConfig, input + ": row " + std::to_string(row) + " is not numeric"};
    }
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
      ++skipped;
      continue;
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  double a = 0.0, b = 0.0, residual = 0.0;
  check(tfi_fit_power_law(xs.data(), ys.data(), xs.size(), &a, &b, &residual));
  json result;
  result["a"] = a;
  result["b"] = b;
  result["residual"] = residual;
  result["n"] = xs.size();
  result["skipped"] = skipped;
  result["x_column"] = xname;
  result["y_column"] = yname;
  write_file(out, result.dump(2) + "\n");
  m.parameters = p;
  m.artifacts = {out};
  m.write(c.manifest.empty() ? fs::path(out + ".manifest.json") : fs::path(c.manifest));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-state inference of Ising spin glasses from noisy couplings"};
  app.set_version_flag("--version", std::string(tfi_version()));
  app.require_subcommand(1);

  Common gen_c, sweep_c, solve_c, mfsweep_c, fit_c;
  GenFlags gen_f;
  SweepFlags sweep_f;
  MfFlags solve_f, mfsweep_f;
  FitFlags fit_f;

  auto* gen = app.add_subcommand("gen", "generate one disorder realization");
  add_common(gen, gen_c, false);
  gen->add_option("--n-sites,-n", gen_f.n_sites, "number of sites");
  gen->add_option("--sigma", gen_f.sigma, "standard deviation of the clean couplings");
  gen->add_option("--gamma", gen_f.gamma, "standard deviation of the noise");
  gen->add_option("--seed", gen_f.seed, "seed");
  gen->add_option("--out,-o", gen_f.out, "instance JSON file");

  auto* sweep = app.add_subcommand("ladder-sweep", "disorder-averaged overlap versus transverse field");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--n-sites,-n", sweep_f.n_sites, "number of sites");
  sweep->add_option("--realizations", sweep_f.realizations, "number of disorder realizations");
  sweep->add_option("--sigma", sweep_f.sigma, "standard deviation of the clean couplings");
  sweep->add_option("--gamma", sweep_f.gamma, "standard deviation of the noise");
  sweep->add_option("--seed", sweep_f.seed, "master seed");
  sweep->add_option("--solver", sweep_f.solver, "lanczos or dmrg");
  sweep->add_option("--fields", sweep_f.fields, "field grid, start:step:stop or a comma list");
  sweep->add_option("--lanczos-tol", sweep_f.lanczos_tol, "Lanczos residual tolerance");
  sweep->add_option("--chi", sweep_f.chi, "DMRG bond dimension");
  sweep->add_option("--out-dir", sweep_f.out_dir, "output directory");
  sweep->add_flag("--resume", sweep_f.resume, "reuse finished realizations from records.csv");

  auto add_mf = [](CLI::App* sub, MfFlags& f, bool grids) {
    sub->add_option("--sigma", f.sigma, "standard deviation of the clean couplings");
    sub->add_option("--j0", f.j0, "mean coupling");
    sub->add_option("--beta", f.beta, "inverse temperature of the noisy system");
    sub->add_option("--beta0", f.beta0, "inverse temperature of the original system");
    sub->add_option("--outer", f.outer, "outer quadrature nodes");
    sub->add_option("--inner", f.inner, "inner quadrature nodes");
    if (grids) {
      sub->add_option("--gamma", f.gamma, "noise level");
      sub->add_option("--gammas", f.gammas, "noise grid, start:step:stop or a comma list");
      sub->add_option("--fields", f.fields, "field grid, start:step:stop or a comma list");
      sub->add_option("--out-dir", f.out_dir, "output directory");
    } else {
      sub->add_option("--gamma", f.gamma, "noise level");
      sub->add_option("--field", f.field, "transverse field");
      sub->add_option("--out,-o", f.out, "result JSON file");
    }
  };
  auto* solve = app.add_subcommand("mf-solve", "mean-field order parameters and overlap at one point");
  add_common(solve, solve_c, false);
  add_mf(solve, solve_f, false);
  auto* mfsweep = app.add_subcommand("mf-sweep", "mean-field overlap versus field, optimum per noise level");
  add_common(mfsweep, mfsweep_c, true);
  add_mf(mfsweep, mfsweep_f, true);

  auto* fit = app.add_subcommand("fit", "power-law fit y = a x^b of two CSV columns");
  add_common(fit, fit_c, false);
  fit->add_option("--input,-i", fit_f.input, "CSV with a header row");
  fit->add_option("--x-column", fit_f.x_column, "default gamma_noise");
  fit->add_option("--y-column", fit_f.y_column, "default gamma_opt");
  fit->add_option("--out,-o", fit_f.out, "fit JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) return run_gen(gen_c, gen_f);
    if (*sweep) return run_ladder_sweep(sweep_c, sweep_f);
    if (*solve) return run_mf_solve(solve_c, solve_f);
    if (*mfsweep) return run_mf_sweep(mfsweep_c, mfsweep_f);
    if (*fit) return run_fit(fit_c, fit_f);
  } catch (const Failure& f) {
    std::fprintf(stderr, "tfinfer: %s\n", f.message.c_str());
    return f.exit_code;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "tfinfer: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tfinfer: %s\n", e.what());
    return kOther;
  }
  return kOther;
}
