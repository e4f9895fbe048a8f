#include "tfinfer/disorder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/rng.hpp"

namespace tfinfer {

namespace {

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

std::vector<double> draw(GaussianStream& rng, std::size_t count, double mean, double stddev) {
  std::vector<double> out(count);
  for (auto& v : out) {
    const double z = rng.standard_normal();
    // stddev == 0 must give exactly `mean`, including the sign of zero.
    v = stddev == 0.0 ? mean : mean + stddev * z;
  }
  return out;
}

}  // namespace

std::vector<double> LadderInstance::noisy_j3() const { return add(j3, xi3); }
std::vector<double> LadderInstance::noisy_j2() const { return add(j2, xi2); }

LadderInstance generate_instance(int n_sites, double sigma, double gamma, std::uint64_t seed) {
  if (n_sites < 3) fail(ErrorCode::InvalidSize, "n_sites must be >= 3, got " + std::to_string(n_sites));
  if (!(sigma >= 0.0) || !(gamma >= 0.0) || !std::isfinite(sigma) || !std::isfinite(gamma))
    fail(ErrorCode::Domain, "sigma and gamma must be finite and nonnegative");

  const auto terms = static_cast<std::size_t>(n_sites - 2);
  GaussianStream rng(seed);
  LadderInstance inst;
  inst.n_sites = n_sites;
  inst.sigma = sigma;
  inst.gamma = gamma;
  inst.seed = seed;
  inst.j3 = draw(rng, terms, 1.0, sigma);
  inst.j2 = draw(rng, terms, 1.0, sigma);
  inst.xi3 = draw(rng, terms, 0.0, gamma);
  inst.xi2 = draw(rng, terms, 0.0, gamma);
  return inst;
}

void validate(const LadderInstance& inst) {
  if (inst.n_sites < 3) fail(ErrorCode::InvalidSize, "n_sites must be >= 3");
  const auto terms = static_cast<std::size_t>(inst.n_sites - 2);
  for (const auto* v : {&inst.j3, &inst.j2, &inst.xi3, &inst.xi2})
    if (v->size() != terms)
      fail(ErrorCode::Dimension, "coupling arrays must have n_sites - 2 = " + std::to_string(terms) + " entries");
  if (!(inst.sigma >= 0.0) || !(inst.gamma >= 0.0)) fail(ErrorCode::Domain, "sigma and gamma must be nonnegative");
}

std::string instance_to_json(const LadderInstance& inst) {
  validate(inst);
  nlohmann::ordered_json doc;
  doc["n_sites"] = inst.n_sites;
  doc["sigma"] = inst.sigma;
  doc["gamma"] = inst.gamma;
  doc["seed"] = inst.seed;
  doc["j3"] = inst.j3;
  doc["j2"] = inst.j2;
  doc["xi3"] = inst.xi3;
  doc["xi2"] = inst.xi2;
  return doc.dump(2) + "\n";
}

namespace {

const nlohmann::json& require(const nlohmann::json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) fail(ErrorCode::Parse, std::string("instance file: missing field '") + field + "'");
  return *it;
}

double number_field(const nlohmann::json& doc, const char* field) {
  const auto& v = require(doc, field);
  if (!v.is_number()) fail(ErrorCode::Parse, std::string("instance file: field '") + field + "' must be a number");
  return v.get<double>();
}

std::vector<double> array_field(const nlohmann::json& doc, const char* field, std::size_t expected) {
  const auto& v = require(doc, field);
  if (!v.is_array()) fail(ErrorCode::Parse, std::string("instance file: field '") + field + "' must be an array");
  if (v.size() != expected)
    fail(ErrorCode::Parse, std::string("instance file: field '") + field + "' has " + std::to_string(v.size()) +
                               " entries, expected " + std::to_string(expected));
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& x : v) {
    if (!x.is_number()) fail(ErrorCode::Parse, std::string("instance file: field '") + field + "' holds a non-number");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

LadderInstance instance_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("instance file: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::Parse, "instance file: top level must be an object");

  LadderInstance inst;
  const auto& n = require(doc, "n_sites");
  if (!n.is_number_integer()) fail(ErrorCode::Parse, "instance file: field 'n_sites' must be an integer");
  inst.n_sites = n.get<int>();
  if (inst.n_sites < 3) fail(ErrorCode::Parse, "instance file: field 'n_sites' must be >= 3");
  inst.sigma = number_field(doc, "sigma");
  inst.gamma = number_field(doc, "gamma");
  const auto& seed = require(doc, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0))
    fail(ErrorCode::Parse, "instance file: field 'seed' must be a nonnegative integer");
  inst.seed = seed.get<std::uint64_t>();
  const auto terms = static_cast<std::size_t>(inst.n_sites - 2);
  inst.j3 = array_field(doc, "j3", terms);
  inst.j2 = array_field(doc, "j2", terms);
  inst.xi3 = array_field(doc, "xi3", terms);
  inst.xi2 = array_field(doc, "xi2", terms);
  validate(inst);
  return inst;
}

void save_instance(const LadderInstance& inst, const std::filesystem::path& path) {
  const std::string text = instance_to_json(inst);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

LadderInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return instance_from_json(buf.str());
}

}  // namespace tfinfer
