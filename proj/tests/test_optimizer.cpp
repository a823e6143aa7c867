#include <cmath>

#include "cwlaser/error.hpp"
#include "cwlaser/optimizer.hpp"
#include "doctest.h"

using namespace cwl;

namespace {

double level1_direct(int q, double tau, double b) {
  const double a = (1 - 3 * b) / 3;
  return 3 * tau * a * std::log2(double(q)) - (a + 2 * b) * std::log2(a + 2 * b) -
         2 * a * std::log2(2 * a) - b * std::log2(b);
}

}  // namespace

TEST_CASE("soft-min") {
  CHECK(softmin_bound(1.5, 1.5) == 1.5);
  CHECK(softmin_bound(0.0, 3.0) == doctest::Approx(1.0));
  CHECK(softmin_bound(3.0, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("soft-min stays within a third of the gap at the second-power report") {
  Level2Family f{0.102787, 0.102058, 0.205540, 0.000232, 0.0125086667};
  const double s = 2 * f.a + f.b + 3 * f.c + 3 * f.d + 6 * f.e;
  f.a /= s, f.b /= s, f.c /= s, f.d /= s, f.e /= s;
  const auto r = evaluate_level2_nonrot(level2_nonrot_params(6, 2.375234 / 3, f));
  const double sm = softmin_bound(r.left, r.right);
  CHECK(std::abs(sm - std::min(r.left, r.right)) <= std::abs(r.left - r.right) * 2.0 / 3.0 + 1e-15);
  CHECK(std::abs(sm - r.left) <= std::abs(r.left - r.right) / 3.0 + 1e-15);
}

TEST_CASE("level-1 optimum") {
  const auto o = optimize_level1(6, 2.38719 / 3);
  CHECK(o.b == doctest::Approx(0.016).epsilon(0.05));
  CHECK(o.log2_value == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(o.log2_value == doctest::Approx(level1_direct(6, 2.38719 / 3, o.b)).epsilon(1e-12));
  CHECK(optimize_level1(6, 1.0).log2_value > 3.0);

  for (int q : {3, 6, 9})
    for (double tau : {0.7, 0.8, 0.95}) {
      double best = -1e9, arg = 0;
      for (double b = 1e-5; b < 1.0 / 3; b += 1e-5) {
        const double v = level1_direct(q, tau, b);
        if (v > best) best = v, arg = b;
      }
      const auto g = optimize_level1(q, tau);
      CHECK(std::abs(g.b - arg) < 1e-4);
      CHECK(g.log2_value >= best - 1e-12);
    }
}

TEST_CASE("level-2 heuristic loop") {
  // Certified at tau itself: a_x <= a_z / p_hat there and the bound reaches
  // (q+2)^2, so omega <= 3 tau. tau* of the same family can sit where the
  // constraint no longer holds, so the certificate is taken at tau.
  const double tau = (2.375234 + 2e-4) / 3;
  const auto o = optimize_level2(6, tau, 5);
  CHECK(o.report.constraint_ok);
  const auto again = verify_level2_nonrot(level2_nonrot_params(6, tau, o.family));
  CHECK(again.log2_bound == doctest::Approx(o.report.log2_bound).epsilon(1e-12));
  CHECK(again.log2_bound >= 2 * std::log2(8.0));
  CHECK(3 * tau <= 2.375234 + 5e-4);
  for (const auto& it : o.history) MESSAGE("t=" << it.t << " bound " << it.log2_bound << " ok " << it.constraint_ok);
}

TEST_CASE("level-2 initial solve reaches the classic bound") {
  const auto o = optimize_level2(6, 2.375234 / 3, 0);
  Pipeline p(level2_family_param_file(6, o.family));
  Pipeline classic(load_params(std::string(CWL_PARAMS_DIR) + "/classic_level2.toml"));
  CHECK(p.omega().omega_bound <= classic.omega().omega_bound + 1e-7);
}

TEST_CASE("level-2 search from scratch") {
  const auto s = optimize_level2_omega(6, 5, omega_from_value([](double t) { return optimize_level1(6, t).log2_value; }, 6, 1).tau_star, 6);
  CHECK(s.omega.omega_bound <= 2.37530);
  CHECK(s.best.report.constraint_ok);
  for (size_t i = 1; i < s.omegas.size(); ++i) MESSAGE("round " << i << " omega " << s.omegas[i]);
}

TEST_CASE("mirror ascent on a concave entropy objective") {
  // max H(x) + <c, x> on the simplex has the softmax solution.
  const std::vector<double> c = {0.3, -0.2, 1.0, 0.0};
  const Objective f = [&](const std::vector<double>& x) {
    double v = 0;
    for (size_t i = 0; i < x.size(); ++i) v += c[i] * x[i] - (x[i] > 0 ? x[i] * std::log2(x[i]) : 0.0);
    return v;
  };
  const auto r = mirror_ascent(f, {0.25, 0.25, 0.25, 0.25}, {{0, 4}});
  double z = 0;
  for (double ci : c) z += std::exp2(ci);
  for (size_t i = 0; i < c.size(); ++i) CHECK(r.x[i] == doctest::Approx(std::exp2(c[i]) / z).epsilon(1e-5));
}

TEST_CASE("component subproblem") {
  const int q = 6;
  const double tau = 0.79;
  std::map<Component, ValuePair> lower;
  for (const auto& c : all_components(1)) lower[c] = merging_value_pair(c, q, tau);
  const Component c{1, 1, 2, 2};
  const auto sym = symhash_value_pair(c, cw112_left(c, q, tau), [&](const Component& x) { return level1_value(x, q, tau); }, tau);
  SubproblemObjective obj;
  const auto r = optimize_component(c, obj, lower, tau, q);
  CHECK(r.value.log2_value >= sym.log2_value - 1e-9);
  CHECK(verify_component(r.params, tau).log2_value == doctest::Approx(r.value.log2_value).epsilon(1e-12));
  for (size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] >= r.history[i - 1] - 1e-12);

  // No outer iterations: the start comes back unchanged.
  const RegionParams start = default_region_params(c, q, lower);
  ComponentOptOptions none;
  none.outer_iters = 0;
  none.refine = false;
  const auto same = optimize_component(c, obj, lower, tau, q, none, start);
  CHECK(same.params.A == start.A);
  for (int t = 0; t < 3; ++t) CHECK(same.params.alpha[t].mass == start.alpha[t].mass);

  CHECK_THROWS_AS(optimize_component({0, 2, 2, 2}, obj, lower, tau, q), Error);
}

TEST_CASE("framework") {
  const auto s1 = run_framework(6, 0.8, 1);
  CHECK(s1.omega.omega_bound <= 2.38719 + 1e-4);

  const auto s2 = run_framework(6, 2.3747 / 3, 2);
  CHECK(s2.omega.omega_bound <= 2.374631 + 5e-4);
  for (size_t i = 1; i < s2.history.size(); ++i) CHECK(s2.history[i] >= s2.history[i - 1] - 1e-12);
  CHECK(Pipeline(s2.params).evaluate(s2.tau).log2_bound == doctest::Approx(s2.log2_bound).epsilon(1e-9));

  const auto s3 = run_framework(5, 2.3747 / 3, 3);
  const auto s2q5 = run_framework(5, 2.3747 / 3, 2);
  CHECK(s3.omega.omega_bound < 2.3753);
  CHECK(s3.omega.omega_bound < s2q5.omega.omega_bound);
  CHECK(Pipeline(s3.params).evaluate(s3.tau).log2_bound == doctest::Approx(s3.log2_bound).epsilon(1e-9));
  MESSAGE("level-3 q=5 framework omega " << s3.omega.omega_bound);
}
