// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "cwlaser/error.hpp"
#include "cwlaser/lasersim.hpp"
#include "cwlaser/optimizer.hpp"
#include "cwlaser/params.hpp"
#include "cwlaser/values.hpp"
#include "fuzz_params.hpp"
#include "sim_fixtures.hpp"

using namespace cwl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string params_path(const char* name) { return std::string(CWL_PARAMS_DIR) + "/" + name; }

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("C%d %s  %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool rel_close(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

// Runs fn, turning any exception into a FAIL line.
void guarded(int id, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, false, std::string("threw: ") + e.what());
  }
}

void c1() {
  const auto t0 = Clock::now();
  Pipeline p(load_params(params_path("level1_q6.toml")));
  const double w = p.omega().omega_bound;
  const double t = seconds_since(t0);
  report(1, std::abs(w - 2.38719) <= 1e-4 && t < 1.0,
         fmt("level 1, q=6, b=0.016: omega=%.9f target 2.38719 tol 1e-4, %.3fs (limit 1s)", w, t));
}

void c2() {
  const auto t0 = Clock::now();
  Pipeline p(load_params(params_path("classic_level2.toml")));
  const double w = p.omega().omega_bound;
  const double t = seconds_since(t0);
  report(2, std::abs(w - 2.375477) <= 1e-4 && t < 5.0,
         fmt("classic level 2: omega=%.9f target 2.375477 tol 1e-4, %.3fs (limit 5s)", w, t));
}

void c3() {
  const auto t0 = Clock::now();
  Pipeline p(load_params(params_path("level2_nonrot.toml")));
  const OmegaResult om = p.omega();
  const VerifyReport r = p.verify(om.tau_star);
  const double t = seconds_since(t0);
  const double ax = std::exp2(r.log2_ax), az = std::exp2(r.log2_az), ip = std::exp2(-r.log2_phat);
  const double deficit = 1.0 - std::exp2(r.hash_loss);
  const bool ok = rel_close(ax, 2.9595937152, 1e-6) && rel_close(az, 2.9570775659, 1e-6) &&
                  rel_close(ip, 1.0008517216, 1e-6) && std::abs(deficit - 2.49e-7) <= 5e-8 &&
                  r.constraint_ok && std::abs(om.omega_bound - 2.375234) <= 1e-5 && t < 30.0;
  report(3, ok,
         fmt("level-2 non-rotational: a_x=%.10f a_z=%.10f 1/p=%.10f (rel 1e-6), deficit=%.3e (2.49e-7 +- 5e-8), "
             "constraint %s, omega=%.9f target 2.375234 tol 1e-5, %.3fs (limit 30s)",
             ax, az, ip, deficit, r.constraint_ok ? "ok" : "violated", om.omega_bound, t));
}

void c4() {
  const auto t0 = Clock::now();
  Pipeline p(load_params(params_path("level2_global.toml")));
  const double w = p.omega().omega_bound;
  const double t = seconds_since(t0);
  report(4, std::abs(w - 2.374631) <= 1e-5 && t < 60.0,
         fmt("level-2 global parameters: omega=%.9f target 2.374631 tol 1e-5, %.3fs (limit 60s)", w, t));
}

void c5() {
  const auto t0 = Clock::now();
  const double tau0 = omega_from_value([](double tau) { return optimize_level1(6, tau).log2_value; }, 6, 1).tau_star;
  const Level2Search s = optimize_level2_omega(6, 5, tau0);
  // Independent re-check of the returned family.
  Pipeline p(level2_family_param_file(6, s.best.family));
  const OmegaResult again = p.omega();
  const double t = seconds_since(t0);
  const bool ok = s.omega.omega_bound <= 2.37530 && std::abs(again.omega_bound - s.omega.omega_bound) <= 1e-9 &&
                  s.best.report.constraint_ok && t < 600.0;
  report(5, ok,
         fmt("optimize_level2 from the level-1 tau (t_max=5): omega=%.9f (re-verified %.9f) limit 2.37530, "
             "%zu tau rounds, %.3fs (limit 600s)",
             s.omega.omega_bound, again.omega_bound, s.omegas.size(), t));
}

void c6() {
  std::puts("C6 note: omega < 2.371866 (eighth power) is not reproducible here; its parameter data is not "
            "part of the published text. Substitute check: random level-3/4 files.");
  const auto t0 = Clock::now();
  int certified = 0, named = 0, crash = 0, unverified = 0;
  double best = 3.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const fuzz::Outcome o = fuzz::run_case(fuzz::make_case(seed));
    switch (o.kind) {
      case fuzz::Outcome::Certified:
        ++certified;
        best = std::min(best, o.omega);
        break;
      case fuzz::Outcome::NamedError: ++named; break;
      case fuzz::Outcome::Crash:
        ++crash;
        std::printf("  seed %llu crashed: %s\n", static_cast<unsigned long long>(seed), o.detail.c_str());
        break;
      case fuzz::Outcome::Unverified:
        ++unverified;
        std::printf("  seed %llu unverified: %s\n", static_cast<unsigned long long>(seed), o.detail.c_str());
        break;
    }
  }
  report(6, crash == 0 && unverified == 0 && certified + named == 100,
         fmt("100 random level-3/4 files: %d certified (best omega %.6f), %d named errors, %d crashes, "
             "%d unverified, %.2fs",
             certified, best, named, crash, unverified, seconds_since(t0)));
}

bool no_shared(const std::vector<BlockTriple>& ts, bool check_z) {
  std::set<std::vector<int>> xs, ys, zs;
  for (const auto& t : ts) {
    if (!xs.insert(t.I).second || !ys.insert(t.J).second) return false;
    if (check_z && !zs.insert(t.K).second) return false;
  }
  return true;
}

void c7() {
  const auto t0 = Clock::now();
  std::vector<std::string> parts;
  bool all = true;
  auto part = [&](bool ok, const std::string& s) {
    all = all && ok;
    parts.push_back(std::string(ok ? "ok " : "FAILED ") + s);
  };

  {  // Hash identity.
    SimRng rng(2024);
    long bad = 0;
    for (int t = 0; t < 10000; ++t) {
      const int level = 1 + static_cast<int>(rng.below(3)), n = 1 + static_cast<int>(rng.below(8)), L = 1 << level;
      const HashConfig cfg = random_hash_config(next_prime(3 + rng.below(1000)), n, rng.below(1u << 30));
      BlockIndex I{level, {}}, J{level, {}}, K{level, {}};
      for (int p = 0; p < n; ++p) {
        const int i = static_cast<int>(rng.below(L + 1)), j = static_cast<int>(rng.below(L + 1 - i));
        I.idx.push_back(i), J.idx.push_back(j), K.idx.push_back(L - i - j);
      }
      bad += (hash_block(cfg, I, Axis::X) + hash_block(cfg, J, Axis::Y)) % cfg.M !=
             (2 * hash_block(cfg, K, Axis::Z)) % cfg.M;
    }
    part(bad == 0, fmt("hash identity 10^4 triples (%ld bad)", bad));
  }
  {  // Salem-Spencer.
    bool ok = true;
    for (int M = 1; M <= 64; ++M) ok = ok && is_ap_free_mod(salem_spencer(M), M);
    part(ok, "Salem-Spencer AP-free M<=64");
  }
  {  // Hashing rounds.
    ComponentCounts sym;
    for (const auto& c : all_components(1)) sym[c] = 1;
    const ComponentCounts asym = {{Component{0, 1, 1, 1}, 2}, {Component{1, 0, 1, 1}, 2}};
    bool ok = true;
    int rounds = 0;
    for (const auto& [counts, mode] : {std::pair{sym, HashingMode::Symmetric}, std::pair{asym, HashingMode::Asymmetric}}) {
      const auto u = enumerate_triples(1, counts);
      const std::uint64_t M = next_prime(4 * u.triples.size() / u.xblocks.size());
      for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto h = hashing_round(u.triples, random_hash_config(M, u.n, seed), mode,
                                     [&](const BlockTriple& t) { return obeys(t, counts); });
        ok = ok && h.certified && no_shared(h.retained, mode == HashingMode::Symmetric);
        ++rounds;
      }
    }
    part(ok, fmt("retained triples disjoint after %d hashing rounds", rounds));
  }
  {  // Hole fixing.
    int mat = 0, stdh = 0;
    const auto f = fixtures::tiny_standard_form();
    const auto tstar = build_standard_form(f);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      mat += fix_matrix_holes(fixtures::half_broken_matmuls(seed), seed).result == matmul_tensor(2, 2, 2);
      const auto out = fix_standard_holes(f, fixtures::half_broken_standard(f, tstar, seed), seed);
      stdh += out.outputs.size() == 1 && out.outputs[0] == tstar;
    }
    part(mat == 100 && stdh == 100, fmt("hole fixing exact: matrix %d/100, standard %d/100", mat, stdh));
  }
  {  // Pipeline certificate.
    int pass = 0, with_copies = 0, hashing_ok = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = level2_pipeline(fixtures::pipeline_n4(), seed);
      pass += r.cert.passed();
      hashing_ok += r.cert.hashing;
      with_copies += !r.copies.empty();
    }
    part(pass == 10 && with_copies > 0,
         fmt("level2_pipeline q=2 n=4: %d/10 certified, %d seeds with copies", pass, with_copies));
  }
  {  // p_comp.
    const auto e = empirical_pcomp(fixtures::pcomp_counts(), fixtures::pcomp_splits(), 200000, 40);
    const double z = (e.estimate - e.exact) / e.sigma;
    part(std::abs(z) <= 3.0, fmt("p_comp n=40: estimate %.6f exact %.6f (z=%.2f)", e.estimate, e.exact, z));
  }
  {  // Hole fraction under the sizing discipline.
    double s = 0, s2 = 0;
    long copies = 0;
    int sized = 0, certified = 0;
    const int seeds = 100;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      const auto r = level2_pipeline(fixtures::pipeline_holes(), seed);
      sized += r.sizing_ok;
      certified += r.cert.passed();
      for (const auto& c : r.copies) {
        const double h = 1.0 - c.eta;
        s += h, s2 += h * h, ++copies;
      }
    }
    const double mean = copies ? s / copies : 1.0;
    const double se = copies > 1 ? std::sqrt(std::max(0.0, s2 / copies - mean * mean) / (copies - 1)) : 1.0;
    part(sized == seeds && certified == seeds && copies > 0 && mean + 3 * se < 0.5,
         fmt("hole fraction %.4f +- %.4f over %ld copies (sizing %d/%d)", mean, se, copies, sized, seeds));
  }
  const double t = seconds_since(t0);
  std::string joined;
  for (const auto& p : parts) joined += "\n     " + p;
  report(7, all && t < 300.0, fmt("simulator suite, %.2fs (limit 300s):", t) + joined);
}

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi, x1 = b - g * (b - a), x2 = a + g * (b - a), f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) a = x1, x1 = x2, f1 = f2, x2 = a + g * (b - a), f2 = f(x2);
    else b = x2, x2 = x1, f2 = f1, x1 = b - g * (b - a), f1 = f(x1);
  }
  return std::max(f1, f2);
}

void c8() {
  double e1 = 0, e2 = 0, e3 = 0;
  for (int q = 2; q <= 8; ++q)
    for (double tau = 2.0 / 3; tau <= 1.0 + 1e-12; tau += 1.0 / 30) {
      e1 = std::max(e1, std::abs(merging_value(2, 2, q, tau, 2) - tau * std::log2(q * q + 2.0)));
      const Component c{0, 2, 2, 2};
      const double best = golden_max(
          [&](double a) {
            return restricted_merging_value(c, SplitDistribution{2, 2, {{0, a}, {1, 1 - 2 * a}, {2, a}}}, q, tau)
                .log2_value;
          },
          0.0, 0.5);
      e2 = std::max(e2, std::abs(best - merging_value(c, q, tau)));
      const double b = 1.0 / (2.0 + std::pow(double(q), 3 * tau)), a = (1 - 2 * b) / 2;
      JointDistribution left{1, {{{0, 1, 1, 1}, a}, {{1, 0, 1, 1}, a}, {{1, 1, 0, 1}, b}, {{0, 0, 2, 1}, b}}};
      const double sym =
          symhash_value_pair({1, 1, 2, 2}, left, [&](const Component& x) { return level1_value(x, q, tau); }, tau)
              .log2_value;
      const double closed = 2.0 / 3.0 + tau * std::log2(double(q)) + std::log2(std::pow(double(q), 3 * tau) + 2) / 3;
      e3 = std::max(e3, std::abs(std::exp2(sym) - std::exp2(closed)) / std::exp2(closed));
    }
  // log2 differences of 1e-12 are relative value differences below 1e-12 / ln 2.
  report(8, e1 * std::log(2.0) <= 1e-12 && e2 <= 1e-9 && e3 <= 1e-9,
         fmt("cross-formula: merging(2,2) vs (q^2+2)^tau %.2e (1e-12), optimized restricted vs merging %.2e (1e-9), "
             "symhash vs 2^(2/3) q^tau (q^(3tau)+2)^(1/3) %.2e (1e-9); q=2..8, tau in [2/3, 1]",
             e1 * std::log(2.0), e2, e3));
}

}  // namespace

int main() {
  guarded(1, c1);
  guarded(2, c2);
  guarded(3, c3);
  guarded(4, c4);
  guarded(5, c5);
  guarded(6, c6);
  guarded(7, c7);
  guarded(8, c8);
  std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
