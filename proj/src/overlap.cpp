#include "tfinfer/overlap.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/rng.hpp"

namespace tfinfer {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, "cannot parse " + what + " '" + text + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<double> fields_from_json(const ordered_json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object())
    return grid_range(j.at("start").get<double>(), j.at("stop").get<double>(), j.at("step").get<double>());
  fail(ErrorCode::Parse, "'fields' must be an array or an object with start, stop and step");
}

void reject_unknown(const ordered_json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& item : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; }))
      fail(ErrorCode::Parse, "unknown key '" + item.key() + "' in " + where);
  }
}

std::size_t grid_index(const std::vector<double>& fields, double field) {
  const auto it = std::find(fields.begin(), fields.end(), field);
  if (it == fields.end()) fail(ErrorCode::InvalidArgument, "record field " + format_double(field) + " is not on the grid");
  return static_cast<std::size_t>(it - fields.begin());
}

SolverStatus status_of(bool degenerate, std::size_t flagged) {
  if (degenerate) return SolverStatus::Degenerate;
  return flagged > 0 ? SolverStatus::Flagged : SolverStatus::Ok;
}

const char* kRecordsHeader = "realization,gamma_field,overlap,solver_status";

std::string record_line(const RealizationRecord& r) {
  return std::to_string(r.realization) + "," + format_double(r.field) + "," + format_double(r.overlap) + "," +
         to_string(r.status);
}

std::vector<RealizationRecord> parse_records(std::istream& in, const std::string& name, bool tolerate_tail) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<RealizationRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const bool complete = end != std::string::npos;
    const std::string line = text.substr(pos, complete ? end - pos : std::string::npos);
    pos = complete ? end + 1 : text.size();
    ++line_no;
    if (!complete && tolerate_tail) break;  // interrupted write
    if (line_no == 1) {
      if (line != kRecordsHeader) fail(ErrorCode::Parse, name + ": unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 4) fail(ErrorCode::Parse, name + ":" + std::to_string(line_no) + ": expected 4 columns");
    RealizationRecord r;
    try {
      r.realization = std::stoi(cells[0]);
    } catch (const std::exception&) {
      fail(ErrorCode::Parse, name + ":" + std::to_string(line_no) + ": bad realization index");
    }
    r.field = parse_double(cells[1], "gamma_field");
    r.overlap = parse_double(cells[2], "overlap");
    r.status = solver_status_from_string(cells[3]);
    out.push_back(r);
  }
  return out;
}

}  // namespace

double overlap_single(const SpinConfiguration& a, const SpinConfiguration& b) {
  if (a.size() != b.size())
    fail(ErrorCode::Dimension, "overlap of configurations with " + std::to_string(a.size()) + " and " +
                                   std::to_string(b.size()) + " spins");
  if (a.size() == 0) fail(ErrorCode::InvalidSize, "overlap of empty configurations");
  long long disagree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) disagree += a[i] != b[i];
  const auto n = static_cast<long long>(a.size());
  return static_cast<double>(n - 2 * disagree) / static_cast<double>(n);
}

const char* to_string(SolverKind kind) noexcept { return kind == SolverKind::Lanczos ? "lanczos" : "dmrg"; }

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "lanczos") return SolverKind::Lanczos;
  if (name == "dmrg") return SolverKind::Dmrg;
  fail(ErrorCode::InvalidArgument, "unknown solver '" + name + "' (expected lanczos or dmrg)");
}

const char* to_string(SolverStatus status) noexcept {
  switch (status) {
    case SolverStatus::Ok: return "ok";
    case SolverStatus::Flagged: return "flagged";
    case SolverStatus::Degenerate: return "degenerate";
    case SolverStatus::Failed: return "failed";
  }
  return "failed";
}

SolverStatus solver_status_from_string(const std::string& name) {
  if (name == "ok") return SolverStatus::Ok;
  if (name == "flagged") return SolverStatus::Flagged;
  if (name == "degenerate") return SolverStatus::Degenerate;
  if (name == "failed") return SolverStatus::Failed;
  fail(ErrorCode::Parse, "unknown solver status '" + name + "'");
}

void SweepConfig::validate() const {
  if (fields.empty()) fail(ErrorCode::InvalidArgument, "field grid is empty");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (!std::isfinite(fields[i]) || fields[i] < 0.0)
      fail(ErrorCode::InvalidArgument, "field grid values must be finite and nonnegative");
    if (i > 0 && !(fields[i] > fields[i - 1])) fail(ErrorCode::InvalidArgument, "field grid must be strictly increasing");
  }
  if (n_realizations < 1) fail(ErrorCode::InvalidArgument, "n_realizations must be positive");
  if (n_sites < 3) fail(ErrorCode::InvalidSize, "ladder needs at least 3 sites");
  if (solver == SolverKind::Lanczos && n_sites > kExactMaxSites)
    fail(ErrorCode::SizeLimit, "the Lanczos solver is limited to N <= " + std::to_string(kExactMaxSites) +
                                   "; use the dmrg solver for larger ladders");
  if (!std::isfinite(sigma) || sigma < 0.0 || !std::isfinite(gamma) || gamma < 0.0)
    fail(ErrorCode::Domain, "sigma and gamma must be finite and nonnegative");
  if (!(lanczos_tol > 0.0) || lanczos_max_iter < 1) fail(ErrorCode::InvalidArgument, "invalid Lanczos parameters");
  if (dmrg_chi < 1 || dmrg_max_sweeps < 2 || !(dmrg_energy_tol > 0.0) || dmrg_anneal_steps < 1)
    fail(ErrorCode::InvalidArgument, "invalid DMRG parameters");
}

std::vector<double> grid_range(double start, double stop, double step) {
  if (!std::isfinite(start) || !(step > 0.0) || !(stop >= start))
    fail(ErrorCode::InvalidArgument, "grid needs step > 0 and stop >= start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) out.push_back(std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12);
  return out;
}

std::string sweep_config_to_json(const SweepConfig& cfg) {
  ordered_json j;
  j["fields"] = cfg.fields;
  j["n_realizations"] = cfg.n_realizations;
  j["n_sites"] = cfg.n_sites;
  j["sigma"] = cfg.sigma;
  j["gamma"] = cfg.gamma;
  j["master_seed"] = cfg.master_seed;
  j["solver"] = to_string(cfg.solver);
  j["lanczos"] = {{"tol", cfg.lanczos_tol}, {"max_iter", cfg.lanczos_max_iter}};
  j["dmrg"] = {{"chi", cfg.dmrg_chi},
               {"max_sweeps", cfg.dmrg_max_sweeps},
               {"energy_tol", cfg.dmrg_energy_tol},
               {"anneal_steps", cfg.dmrg_anneal_steps}};
  return j.dump(2);
}

SweepConfig sweep_config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("sweep config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Parse, "sweep config must be a JSON object");
  SweepConfig cfg;
  try {
    reject_unknown(j, {"fields", "n_realizations", "n_sites", "sigma", "gamma", "master_seed", "solver", "lanczos", "dmrg"},
                   "sweep config");
    if (j.contains("fields")) cfg.fields = fields_from_json(j["fields"]);
    if (j.contains("n_realizations")) cfg.n_realizations = j["n_realizations"].get<int>();
    if (j.contains("n_sites")) cfg.n_sites = j["n_sites"].get<int>();
    if (j.contains("sigma")) cfg.sigma = j["sigma"].get<double>();
    if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
    if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("solver")) cfg.solver = solver_kind_from_string(j["solver"].get<std::string>());
    if (j.contains("lanczos")) {
      const auto& l = j["lanczos"];
      reject_unknown(l, {"tol", "max_iter"}, "lanczos section");
      if (l.contains("tol")) cfg.lanczos_tol = l["tol"].get<double>();
      if (l.contains("max_iter")) cfg.lanczos_max_iter = l["max_iter"].get<int>();
    }
    if (j.contains("dmrg")) {
      const auto& d = j["dmrg"];
      reject_unknown(d, {"chi", "max_sweeps", "energy_tol", "anneal_steps"}, "dmrg section");
      if (d.contains("chi")) cfg.dmrg_chi = d["chi"].get<int>();
      if (d.contains("max_sweeps")) cfg.dmrg_max_sweeps = d["max_sweeps"].get<int>();
      if (d.contains("energy_tol")) cfg.dmrg_energy_tol = d["energy_tol"].get<double>();
      if (d.contains("anneal_steps")) cfg.dmrg_anneal_steps = d["anneal_steps"].get<int>();
    }
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad value in sweep config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<RealizationRecord> run_realization(const SweepConfig& cfg, int k) {
  const std::uint64_t seed = realization_seed(cfg.master_seed, static_cast<std::uint64_t>(k));
  const LadderInstance inst = generate_instance(cfg.n_sites, cfg.sigma, cfg.gamma, seed);
  const SpinConfiguration truth = viterbi_ground_state(inst.j3, inst.j2).config;

  std::vector<RealizationRecord> out;
  out.reserve(cfg.fields.size());
  std::vector<double> previous;
  for (double field : cfg.fields) {
    RealizationRecord rec;
    rec.realization = k;
    rec.field = field;
    try {
      if (cfg.solver == SolverKind::Lanczos) {
        LanczosOptions opts;
        opts.tol = cfg.lanczos_tol;
        opts.max_iter = cfg.lanczos_max_iter;
        opts.seed = seed;
        QuantumGroundState gs = ground_state_lanczos(inst, field, opts, previous);
        const InferredConfiguration inferred = inferred_configuration(gs.state);
        rec.overlap = overlap_single(truth, inferred.config);
        rec.status = status_of(gs.near_degenerate, inferred.flagged_count());
        previous = std::move(gs.state.amplitudes);
      } else {
        DmrgOptions opts;
        opts.chi = cfg.dmrg_chi;
        opts.max_sweeps = cfg.dmrg_max_sweeps;
        opts.energy_tol = cfg.dmrg_energy_tol;
        opts.schedule = AnnealSchedule::defaults(field);
        opts.schedule.n_steps = cfg.dmrg_anneal_steps;
        opts.seed = seed;
        const DmrgResult res = dmrg_ground_state(inst, opts);
        const InferredConfiguration inferred = inferred_configuration(mps_magnetizations_z(res.mps));
        rec.overlap = overlap_single(truth, inferred.config);
        rec.status = status_of(false, inferred.flagged_count());
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Convergence && e.code() != ErrorCode::Numerical) throw;
      rec.overlap = std::numeric_limits<double>::quiet_NaN();
      rec.status = SolverStatus::Failed;
      previous.clear();
    }
    out.push_back(rec);
  }
  return out;
}

int OverlapCurve::total_failed() const {
  int total = 0;
  for (const auto& p : points) total += p.failed;
  return total;
}

OverlapCurve aggregate_records(const SweepConfig& cfg, std::vector<RealizationRecord> records) {
  cfg.validate();
  std::vector<std::pair<std::size_t, const RealizationRecord*>> keyed;
  keyed.reserve(records.size());
  for (const auto& r : records) keyed.emplace_back(grid_index(cfg.fields, r.field), &r);
  std::sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) {
    return x.second->realization != y.second->realization ? x.second->realization < y.second->realization
                                                          : x.first < y.first;
  });

  OverlapCurve curve;
  curve.config = cfg;
  curve.points.resize(cfg.fields.size());
  std::vector<std::vector<double>> values(cfg.fields.size());
  std::vector<int> flagged(cfg.fields.size(), 0);
  for (const auto& [g, r] : keyed) {
    if (r->status == SolverStatus::Failed) {
      ++curve.points[g].failed;
      continue;
    }
    values[g].push_back(r->overlap);
    if (r->status != SolverStatus::Ok) ++flagged[g];
  }
  for (std::size_t g = 0; g < cfg.fields.size(); ++g) {
    CurvePoint& p = curve.points[g];
    p.field = cfg.fields[g];
    const auto& v = values[g];
    p.n = static_cast<int>(v.size());
    if (v.empty()) {
      p.mean = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    p.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - p.mean) * (x - p.mean);
      p.stderr_mean = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    p.flagged_rate = static_cast<double>(flagged[g]) / static_cast<double>(v.size());
  }
  return curve;
}

OverlapCurve run_sweep(const SweepConfig& cfg, const SweepIo& io) {
  cfg.validate();
  if (io.workers < 1) fail(ErrorCode::InvalidArgument, "workers must be at least 1");
  const int n = cfg.n_realizations;
  const std::size_t per_realization = cfg.fields.size();
  std::vector<std::vector<RealizationRecord>> results(static_cast<std::size_t>(n));
  std::vector<char> complete(static_cast<std::size_t>(n), 0);

  const bool persist = !io.records_csv.empty();
  if (persist && io.resume && std::filesystem::exists(io.records_csv)) {
    std::ifstream in(io.records_csv, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot read " + io.records_csv.string());
    std::map<int, std::vector<RealizationRecord>> grouped;
    for (const auto& r : parse_records(in, io.records_csv.string(), true)) {
      if (r.realization < 0 || r.realization >= n)
        fail(ErrorCode::InvalidArgument, "records file holds realization " + std::to_string(r.realization) +
                                             " outside this configuration");
      grid_index(cfg.fields, r.field);
      grouped[r.realization].push_back(r);
    }
    for (auto& [k, recs] : grouped) {
      std::sort(recs.begin(), recs.end(), [&](const auto& a, const auto& b) {
        return grid_index(cfg.fields, a.field) < grid_index(cfg.fields, b.field);
      });
      bool full = recs.size() == per_realization;
      for (std::size_t g = 0; full && g < per_realization; ++g) full = recs[g].field == cfg.fields[g];
      if (!full) continue;  // partially written realization: recompute it
      results[static_cast<std::size_t>(k)] = std::move(recs);
      complete[static_cast<std::size_t>(k)] = 1;
    }
  }

  std::ofstream journal;
  if (persist) {
    std::vector<RealizationRecord> kept;
    for (int k = 0; k < n; ++k)
      if (complete[static_cast<std::size_t>(k)])
        kept.insert(kept.end(), results[static_cast<std::size_t>(k)].begin(), results[static_cast<std::size_t>(k)].end());
    write_records_csv(kept, io.records_csv);
    journal.open(io.records_csv, std::ios::binary | std::ios::app);
    if (!journal) fail(ErrorCode::Io, "cannot append to " + io.records_csv.string());
  }

  std::vector<int> pending;
  for (int k = 0; k < n; ++k)
    if (!complete[static_cast<std::size_t>(k)]) pending.push_back(k);
  int done = n - static_cast<int>(pending.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex sink;
  std::exception_ptr error;
  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const int k = pending[i];
      try {
        auto recs = run_realization(cfg, k);
        std::lock_guard<std::mutex> lock(sink);
        if (persist) {
          for (const auto& r : recs) journal << record_line(r) << '\n';
          journal.flush();
          if (!journal) fail(ErrorCode::Io, "failed writing " + io.records_csv.string());
        }
        results[static_cast<std::size_t>(k)] = std::move(recs);
        ++done;
        if (io.progress) io.progress(k, done, n);
      } catch (...) {
        std::lock_guard<std::mutex> lock(sink);
        if (!error) error = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const int threads = std::min<int>(io.workers, std::max<int>(1, static_cast<int>(pending.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<RealizationRecord> all;
  all.reserve(static_cast<std::size_t>(n) * per_realization);
  for (auto& recs : results) all.insert(all.end(), recs.begin(), recs.end());
  if (persist) {
    journal.close();
    write_records_csv(all, io.records_csv);
  }
  return aggregate_records(cfg, std::move(all));
}

void write_records_csv(std::span<const RealizationRecord> records, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out << kRecordsHeader << '\n';
    for (const auto& r : records) out << record_line(r) << '\n';
    if (!out.flush()) fail(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::vector<RealizationRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return parse_records(in, path.string(), false);
}

void write_curve_csv(const OverlapCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "gamma_field,mean_M,stderr,n,flagged_rate\n";
  for (const auto& p : curve.points)
    out << format_double(p.field) << ',' << format_double(p.mean) << ',' << format_double(p.stderr_mean) << ','
        << p.n << ',' << format_double(p.flagged_rate) << '\n';
  if (!out.flush()) fail(ErrorCode::Io, "failed writing " + path.string());
}

std::string curve_metadata_json(const OverlapCurve& curve) {
  ordered_json j;
  j["config"] = ordered_json::parse(sweep_config_to_json(curve.config));
  std::vector<int> failed;
  for (const auto& p : curve.points) failed.push_back(p.failed);
  j["failed_per_point"] = failed;
  j["total_failed"] = curve.total_failed();
  return j.dump(2);
}

GammaOpt find_gamma_opt(std::span<const double> fields, std::span<const double> values) {
  if (fields.size() != values.size()) fail(ErrorCode::Dimension, "fields and values differ in length");
  if (fields.size() < 3) fail(ErrorCode::InsufficientData, "locating the optimum needs at least 3 grid points");
  std::size_t best = fields.size();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isnan(values[i]) && (best == fields.size() || values[i] > values[best])) best = i;
  if (best == fields.size()) fail(ErrorCode::InsufficientData, "every curve value is missing");
  if (best == 0 || best + 1 == fields.size()) return {fields[best], values[best], true};

  const double x0 = fields[best - 1], x1 = fields[best], x2 = fields[best + 1];
  const double y0 = values[best - 1], y1 = values[best], y2 = values[best + 1];
  if (std::isnan(y0) || std::isnan(y2)) return {x1, y1, false};
  const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
  const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
  if (den == 0.0) return {x1, y1, false};
  const double vertex = std::clamp(x1 - 0.5 * num / den, x0, x2);
  const double value = y0 * (vertex - x1) * (vertex - x2) / ((x0 - x1) * (x0 - x2)) +
                       y1 * (vertex - x0) * (vertex - x2) / ((x1 - x0) * (x1 - x2)) +
                       y2 * (vertex - x0) * (vertex - x1) / ((x2 - x0) * (x2 - x1));
  return {vertex, value, false};
}

GammaOpt find_gamma_opt(const OverlapCurve& curve) {
  std::vector<double> fields;
  std::vector<double> means;
  for (const auto& p : curve.points) {
    fields.push_back(p.field);
    means.push_back(p.mean);
  }
  return find_gamma_opt(fields, means);
}

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::Dimension, "x and y differ in length");
  if (x.size() < 3) fail(ErrorCode::InsufficientData, "a power-law fit needs at least 3 points");
  const std::size_t n = x.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i]))
      fail(ErrorCode::Domain, "power-law fit needs positive finite values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCode::InsufficientData, "power-law fit needs at least two distinct x values");
  PowerLawFit fit;
  fit.b = sxy / sxx;
  const double log_a = my - fit.b * mx;
  fit.a = std::exp(log_a);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (log_a + fit.b * lx[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

}  // namespace tfinfer
