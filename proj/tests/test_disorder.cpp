#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "tfinfer/disorder.hpp"
#include "tfinfer/error.hpp"
#include "tfinfer/rng.hpp"

using namespace tfinfer;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tfinfer_test_disorder";
  fs::create_directories(dir);
  return dir / name;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

struct Moments {
  double mean = 0.0, var = 0.0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

}  // namespace

TEST_CASE("zero variances give unit couplings and no noise") {
  const auto inst = generate_instance(10, 0.0, 0.0, 12345);
  REQUIRE(inst.n_terms() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(inst.j3[i] == 1.0);
    CHECK(inst.j2[i] == 1.0);
    CHECK(inst.xi3[i] == 0.0);
    CHECK(inst.xi2[i] == 0.0);
  }
}

TEST_CASE("gamma zero leaves the noisy couplings equal to the clean ones") {
  const auto inst = generate_instance(10, 0.5, 0.0, 4);
  CHECK(inst.noisy_j3() == inst.j3);
  CHECK(inst.noisy_j2() == inst.j2);
  for (double x : inst.xi3) CHECK(x == 0.0);
}

TEST_CASE("noisy couplings are the clean couplings plus noise") {
  const auto inst = generate_instance(12, 1.0, 0.4, 99);
  const auto n3 = inst.noisy_j3();
  for (std::size_t i = 0; i < inst.n_terms(); ++i) CHECK(n3[i] == inst.j3[i] + inst.xi3[i]);
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(generate_instance(30, 1.0, 0.4, 7) == generate_instance(30, 1.0, 0.4, 7));
  CHECK_FALSE(generate_instance(30, 1.0, 0.4, 7) == generate_instance(30, 1.0, 0.4, 8));
}

TEST_CASE("fewer than three sites is a size error") {
  CHECK(code_of([] { generate_instance(2, 1.0, 0.0, 0); }) == ErrorCode::InvalidSize);
  CHECK(code_of([] { generate_instance(0, 1.0, 0.0, 0); }) == ErrorCode::InvalidSize);
}

TEST_CASE("negative widths are rejected") {
  CHECK_THROWS_AS(generate_instance(5, -1.0, 0.0, 0), Error);
  CHECK_THROWS_AS(generate_instance(5, 1.0, -0.1, 0), Error);
}

TEST_CASE("pooled coupling moments match the stated distributions") {
  // 1200 seeds at N = 298: 355200 samples per family.
  std::vector<double> j3, j2, xi3, xi2;
  for (std::uint64_t k = 0; k < 1200; ++k) {
    const auto inst = generate_instance(298, 1.0, 0.4, realization_seed(2024, k));
    j3.insert(j3.end(), inst.j3.begin(), inst.j3.end());
    j2.insert(j2.end(), inst.j2.begin(), inst.j2.end());
    xi3.insert(xi3.end(), inst.xi3.begin(), inst.xi3.end());
    xi2.insert(xi2.end(), inst.xi2.begin(), inst.xi2.end());
  }
  auto check_family = [](const std::vector<double>& v, double mean, double var) {
    const auto m = moments(v);
    const double n = static_cast<double>(m.n);
    // standard errors of the sample mean and (Gaussian) sample variance
    const double se_mean = std::sqrt(var / n);
    const double se_var = var * std::sqrt(2.0 / (n - 1.0));
    CHECK(std::abs(m.mean - mean) < 3.0 * se_mean);
    CHECK(std::abs(m.var - var) < 3.0 * se_var);
  };
  check_family(j3, 1.0, 1.0);
  check_family(j2, 1.0, 1.0);
  check_family(xi3, 0.0, 0.16);
  check_family(xi2, 0.0, 0.16);
}

TEST_CASE("save and load round-trip exactly") {
  const auto inst = generate_instance(298, 1.0, 0.4, 31337);
  const auto path = scratch("inst298.json");
  save_instance(inst, path);
  const auto back = load_instance(path);
  CHECK(back == inst);
  // bit-level comparison of every coupling
  for (std::size_t i = 0; i < inst.n_terms(); ++i) {
    CHECK(std::memcmp(&back.j3[i], &inst.j3[i], sizeof(double)) == 0);
    CHECK(std::memcmp(&back.xi2[i], &inst.xi2[i], sizeof(double)) == 0);
  }
}

TEST_CASE("JSON schema carries the documented keys") {
  const auto j = nlohmann::json::parse(instance_to_json(generate_instance(5, 1.0, 0.2, 1)));
  for (const char* key : {"n_sites", "sigma", "gamma", "seed", "j3", "j2", "xi3", "xi2"}) CHECK(j.contains(key));
  CHECK(j["j3"].size() == 3);
}

TEST_CASE("malformed instance files are parse errors naming the field") {
  auto j = nlohmann::json::parse(instance_to_json(generate_instance(6, 1.0, 0.2, 1)));
  auto without = [&](const char* key) {
    auto copy = j;
    copy.erase(key);
    return copy.dump();
  };
  try {
    instance_from_json(without("seed"));
    FAIL("missing seed accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("seed") != std::string::npos);
  }
  CHECK(code_of([&] { instance_from_json(without("xi2")); }) == ErrorCode::Parse);
  CHECK(code_of([] { instance_from_json("{not json"); }) == ErrorCode::Parse);

  auto bad = j;
  bad["j3"].push_back(1.0);
  CHECK_THROWS_AS(instance_from_json(bad.dump()), Error);
}

TEST_CASE("missing file is an IO error") {
  CHECK(code_of([] { load_instance("/nonexistent/dir/instance.json"); }) == ErrorCode::Io);
}

TEST_CASE("realization seeds are distinct and order independent") {
  CHECK(realization_seed(0, 0) != realization_seed(0, 1));
  CHECK(realization_seed(0, 5) != realization_seed(1, 5));
  CHECK(realization_seed(17, 3) == realization_seed(17, 3));
}

TEST_CASE("uniform deviates stay in (0, 1]") {
  GaussianStream g(5);
  for (int i = 0; i < 100000; ++i) {
    const double u = g.uniform_open0();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}
