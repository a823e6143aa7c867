#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cwlaser/error.hpp"
#include "cwlaser/params.hpp"
#include "doctest.h"
#include "fuzz_params.hpp"

using namespace cwl;

namespace {

std::string params_path(const char* name) { return std::string(CWL_PARAMS_DIR) + "/" + name; }

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no cwl::Error thrown");
  return ErrorKind::ValidationError;
}

const char* kLevel1 = R"(schema = 1
q = 6
level = 1
mode = "level1"
hashing = "symmetric"
alpha = [
  [0, 1, 1, 0.3173333333333333],
  [1, 0, 1, 0.3173333333333333],
  [1, 1, 0, 0.3173333333333333],
  [0, 0, 2, 0.016],
  [0, 2, 0, 0.016],
  [2, 0, 0, 0.016],
]
)";

}  // namespace

TEST_CASE("bundled files load and verify") {
  Pipeline s46(load_params(params_path("level2_nonrot.toml")));
  CHECK(s46.omega().omega_bound <= 2.375234 + 1e-5);
  Pipeline t1(load_params(params_path("level2_global.toml")));
  CHECK(t1.omega().omega_bound <= 2.374631 + 1e-5);
  CHECK(t1.params().alpha.mass.size() == 15);
}

TEST_CASE("save and load round-trip") {
  for (const char* f : {"level1_q6.toml", "classic_level2.toml", "level2_nonrot.toml", "level2_global.toml"}) {
    const ParamFile pf = load_params(params_path(f));
    const auto tmp = std::filesystem::temp_directory_path() / (std::string("cwl_rt_") + f);
    save_params(pf, tmp.string());
    const ParamFile back = load_params(tmp.string());
    std::filesystem::remove(tmp);
    CHECK(dump_params(back) == dump_params(pf));
    CHECK(back.alpha.mass == pf.alpha.mass);
    Pipeline a(pf), b(back);
    const double tau = 0.7918;
    CHECK(a.evaluate(tau).log2_bound == b.evaluate(tau).log2_bound);
  }
}

TEST_CASE("parse errors name the problem") {
  CHECK(parse_params(kLevel1).q == 6);
  std::string bad_sum = kLevel1;
  bad_sum.replace(bad_sum.find("0.016]"), 5, "0.216");
  CHECK(kind_of([&] { parse_params(bad_sum); }) == ErrorKind::ValidationError);

  std::string bad_toml = kLevel1;
  bad_toml.replace(bad_toml.find("q = 6"), 5, "q = = 6");
  try {
    parse_params(bad_toml, "x.toml");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("x.toml") != std::string::npos);
  }

  std::string bad_comp = kLevel1;
  bad_comp.replace(bad_comp.find("[0, 0, 2,"), 9, "[0, 1, 2,");
  CHECK_THROWS_AS(parse_params(bad_comp), Error);

  std::string neg = kLevel1;
  neg.replace(neg.find("0.016]"), 5, "-0.01");
  CHECK_THROWS_AS(parse_params(neg), Error);

  CHECK(kind_of([] { load_params("/nonexistent/params.toml"); }) == ErrorKind::ParseError);
}

TEST_CASE("digests and determinism") {
  CHECK(fnv1a_hex("") == fnv1a_hex(""));
  CHECK(fnv1a_hex("a") != fnv1a_hex("b"));
  const ParamFile pf = parse_params(kLevel1);
  const auto r1 = Pipeline(pf).omega(), r2 = Pipeline(pf).omega();
  CHECK(r1.omega_bound == r2.omega_bound);
  CHECK(r1.tau_star == r2.tau_star);
}

TEST_CASE("random level-3/4 files are certified or rejected by name") {
  int certified = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cs = fuzz::make_case(seed);
    const auto o = fuzz::run_case(cs);
    CHECK_MESSAGE(o.kind != fuzz::Outcome::Crash, "seed " << seed << ": " << o.detail);
    CHECK_MESSAGE(o.kind != fuzz::Outcome::Unverified, "seed " << seed << ": " << o.detail);
    certified += o.kind == fuzz::Outcome::Certified;
  }
  CHECK(certified > 0);
}
