#include <cmath>

#include "cwlaser/error.hpp"
#include "cwlaser/lasersim.hpp"
#include "doctest.h"
#include "sim_fixtures.hpp"

using namespace cwl;

namespace {

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no cwl::Error thrown");
  return ErrorKind::ValidationError;
}

bool shares_block(const std::vector<BlockTriple>& ts, int axis) {
  std::set<std::vector<int>> seen;
  for (const auto& t : ts)
    if (!seen.insert(axis == 0 ? t.I : axis == 1 ? t.J : t.K).second) return true;
  return false;
}

// Largest AP-free subset of Z_M by brute force over all subsets.
int max_ap_free_brute(int M) {
  int best = 0;
  for (std::uint32_t mask = 1; mask < (1u << M); ++mask) {
    const int sz = __builtin_popcount(mask);
    if (sz <= best) continue;
    std::vector<int> a;
    for (int i = 0; i < M; ++i)
      if (mask >> i & 1) a.push_back(i);
    bool ok = true;
    for (int x : a)
      for (int y : a)
        for (int z : a)
          if (!(x == y && y == z) && (x + z) % M == (2 * y) % M) ok = false;
    if (ok) best = sz;
  }
  return best;
}

}  // namespace

TEST_CASE("CW powers") {
  CHECK(build_cw_power(2, 1).size() == 9);
  CHECK(build_cw_power(6, 1).size() == 21);
  CHECK(build_cw_power(2, 2).size() == 81);
  CHECK(build_cw_power(3, 3).size() == 12 * 12 * 12);
  CHECK(kind_of([] { build_cw_power(6, 6, 1000); }) == ErrorKind::TooLarge);

  const auto t011 = cw_component(2, {0, 1, 1, 1});
  CHECK(t011.size() == 2);
  // Level-1 blocks with i + j + k != 2 carry no terms.
  const auto cw = build_cw_power(3, 2);
  for (const auto& term : cw.terms) {
    const auto a = level1_indices(3, 2, term.x), b = level1_indices(3, 2, term.y), c = level1_indices(3, 2, term.z);
    for (int d = 0; d < 2; ++d) CHECK(a[d] + b[d] + c[d] == 2);
  }
}

TEST_CASE("level-2 T_{1,1,2} is the sum of four products") {
  const int q = 2;
  auto comp = [&](int i, int j, int k) { return cw_component(q, {i, j, k, 1}); };
  // tensor_product(a, b) puts b in the low digit.
  const std::vector<SparseTensor> parts = {
      tensor_product(comp(0, 0, 2), comp(1, 1, 0)), tensor_product(comp(1, 1, 0), comp(0, 0, 2)),
      tensor_product(comp(1, 0, 1), comp(0, 1, 1)), tensor_product(comp(0, 1, 1), comp(1, 0, 1))};
  CHECK(identify(parts) == cw_component(q, {1, 1, 2, 2}));
}

TEST_CASE("tensor operations") {
  const auto t = build_cw_power(2, 1);
  CHECK(tensor_product(t, matmul_tensor(1, 1, 1)).size() == t.size());
  CHECK(rotate_tensor(rotate_tensor(rotate_tensor(t))) == t);
  CHECK(swap_tensor(swap_tensor(t)) == t);
  CHECK(direct_sum(t, t).size() == 2 * t.size());
  CHECK(sym3(t).size() == t.size() * t.size() * t.size());
  CHECK(sym6(t).size() == sym3(t).size() * sym3(t).size());

  const auto z = zero_out(t, [](std::uint64_t x) { return x != 0; }, [](std::uint64_t) { return true; },
                          [](std::uint64_t) { return true; });
  for (const auto& term : t.terms) {
    const bool kept = std::find(z.terms.begin(), z.terms.end(), term) != z.terms.end();
    CHECK(kept == (term.x != 0));
  }
  CHECK(z.same_universe(t));
  CHECK(kind_of([&] { identify({t, matmul_tensor(2, 2, 3)}); }) == ErrorKind::UniverseMismatch);
  const std::string d = dump_tensor(matmul_tensor(1, 1, 2));
  // Header line plus one line per term.
  CHECK(std::count(d.begin(), d.end(), '\n') == 3);
}

TEST_CASE("matrix multiplication recognition") {
  auto m = is_matmul(matmul_tensor(2, 3, 4));
  REQUIRE(m);
  CHECK(*m == std::array<long, 3>{2, 3, 4});
  CHECK_FALSE(is_matmul(build_cw_power(2, 1)));
  for (int q : {2, 3}) {
    const auto prod = tensor_product(tensor_product(cw_component(q, {0, 1, 1, 1}), cw_component(q, {1, 0, 1, 1})),
                                     cw_component(q, {1, 1, 0, 1}));
    auto mm = is_matmul(prod);
    REQUIRE(mm);
    CHECK((*mm)[0] * (*mm)[1] * (*mm)[2] == long(q) * q * q);
    CHECK((*mm)[0] == q);
    CHECK((*mm)[1] == q);
  }
  auto m022 = is_matmul(cw_component(2, {0, 2, 2, 2}));
  REQUIRE(m022);
  std::array<long, 3> dims = *m022;
  std::sort(dims.begin(), dims.end());
  CHECK(dims == std::array<long, 3>{1, 1, 6});
}

TEST_CASE("Salem-Spencer sets") {
  CHECK(salem_spencer(1) == std::vector<int>{0});
  CHECK(salem_spencer(2).size() == 1);
  CHECK(salem_spencer(31).size() == 8);
  for (int M = 1; M <= 16; ++M) CHECK(int(salem_spencer(M).size()) == max_ap_free_brute(M));
  for (int M = 1; M <= 64; ++M) CHECK(is_ap_free_mod(salem_spencer(M), M));
  for (int M : {65, 101, 257, 1009, 4099}) {
    const auto a = salem_spencer(M);
    CHECK(is_ap_free_mod(a, M));
    CHECK(a.size() >= 8);
  }
  CHECK_FALSE(is_ap_free_mod({0, 1, 2}, 7));
}

TEST_CASE("hash identity on random triples") {
  SimRng rng(77);
  for (int t = 0; t < 10000; ++t) {
    const int level = 1 + int(rng.below(3)), n = 1 + int(rng.below(8)), L = 1 << level;
    const HashConfig cfg = random_hash_config(next_prime(3 + rng.below(500)), n, rng.below(1u << 30));
    BlockIndex I{level, {}}, J{level, {}}, K{level, {}};
    for (int p = 0; p < n; ++p) {
      const int i = int(rng.below(L + 1)), j = int(rng.below(L + 1 - i));
      I.idx.push_back(i), J.idx.push_back(j), K.idx.push_back(L - i - j);
    }
    const auto hx = hash_block(cfg, I, Axis::X), hy = hash_block(cfg, J, Axis::Y), hz = hash_block(cfg, K, Axis::Z);
    CHECK((hx + hy) % cfg.M == (2 * hz) % cfg.M);
  }
}

TEST_CASE("hash configuration") {
  HashConfig zero{7, 3, {0, 0, 0}, 0};
  CHECK(hash_block(zero, {1, {0, 1}}, Axis::X) == 3);
  CHECK(hash_block(zero, {1, {2, 2}}, Axis::X) == 3);
  HashConfig even{8, 0, {0, 0}, 0};
  CHECK(kind_of([&] { even.validate(); }) == ErrorKind::EvenModulus);
  HashConfig big{7, 9, {0, 0}, 0};
  CHECK_THROWS_AS(big.validate(), Error);
  CHECK(next_prime(8) == 11);
  CHECK(is_prime(101));
  CHECK_FALSE(is_prime(91));
}

TEST_CASE("hash differences are pairwise independent for a shared Z-block") {
  const std::uint64_t M = 5;
  const BlockIndex K{1, {1, 1, 2, 0}};
  const BlockIndex I1{1, {0, 1, 0, 2}}, I2{1, {1, 0, 1, 1}};
  std::vector<long> cnt(M * M, 0);
  const int trials = 10000;
  for (int s = 0; s < trials; ++s) {
    const auto cfg = random_hash_config(M, 4, 1000 + s);
    const auto hz = hash_block(cfg, K, Axis::Z);
    const auto a = (hash_block(cfg, I1, Axis::X) + M - hz) % M, b = (hash_block(cfg, I2, Axis::X) + M - hz) % M;
    ++cnt[a * M + b];
  }
  double chi2 = 0;
  const double e = double(trials) / (M * M);
  for (long c : cnt) chi2 += (c - e) * (c - e) / e;
  // 24 degrees of freedom: mean 24, sd sqrt(48).
  CHECK(chi2 < 24 + 3 * std::sqrt(48.0));
}

TEST_CASE("symmetric hashing round") {
  ComponentCounts counts;
  for (const auto& c : all_components(1)) counts[c] = 1;
  const auto u = enumerate_triples(1, counts);
  CHECK(u.triples.size() == 720);
  const std::uint64_t M = next_prime(4 * u.triples.size() / u.xblocks.size());
  int with_retained = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = hashing_round(u.triples, random_hash_config(M, u.n, seed), HashingMode::Symmetric,
                                 [&](const BlockTriple& t) { return obeys(t, counts); });
    CHECK(h.certified);
    for (int ax = 0; ax < 3; ++ax) CHECK_FALSE(shares_block(h.retained, ax));
    for (const auto& t : h.retained) CHECK(obeys(t, counts));
    with_retained += !h.retained.empty();
  }
  CHECK(with_retained >= 1);
}

TEST_CASE("asymmetric hashing keeps shared Z-blocks") {
  const ComponentCounts counts = {{Component{0, 1, 1, 1}, 2}, {Component{1, 0, 1, 1}, 2}};
  const auto u = enumerate_triples(1, counts);
  REQUIRE(u.xblocks.size() > u.zblocks.size());
  const std::uint64_t M = next_prime(4 * u.triples.size() / u.xblocks.size());
  bool shared_z = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = hashing_round(u.triples, random_hash_config(M, u.n, seed), HashingMode::Asymmetric,
                                 [](const BlockTriple&) { return true; });
    CHECK(h.certified);
    CHECK_FALSE(shares_block(h.retained, 0));
    CHECK_FALSE(shares_block(h.retained, 1));
    shared_z = shared_z || shares_block(h.retained, 2);
  }
  CHECK(shared_z);
}

TEST_CASE("a large modulus leaves nothing to prune") {
  const ComponentCounts counts = {{Component{0, 1, 1, 1}, 1}, {Component{1, 0, 1, 1}, 1}, {Component{1, 1, 0, 1}, 1}};
  const auto u = enumerate_triples(1, counts);
  const std::uint64_t M = next_prime(100 * u.triples.size() * u.triples.size());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto h = hashing_round(u.triples, random_hash_config(M, u.n, seed), HashingMode::Symmetric,
                                 [](const BlockTriple&) { return true; });
    CHECK(h.pruned_shared == 0);
    CHECK(long(h.retained.size()) == h.after_hash);
  }
}

TEST_CASE("compatibility") {
  const ComponentCounts counts = {{Component{1, 1, 2, 2}, 2}, {Component{0, 2, 2, 2}, 2}};
  const BlockTriple t{2, {1, 1, 0, 0}, {1, 1, 2, 2}, {2, 2, 2, 2}};
  SplitMap s;
  s[Component{1, 1, 2, 2}] = SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}};
  s[Component{0, 2, 2, 2}] = SplitDistribution{2, 2, {{1, 1.0}}};
  const auto alpha = alpha_from_counts(counts);
  CHECK(compatibility({0, 2, 2, 0, 1, 1, 1, 1}, t, s, alpha));
  CHECK_FALSE(compatibility({1, 1, 2, 0, 0, 2, 1, 1}, t, s, alpha));
  CHECK(kind_of([&] { compatibility({3, 0, 2, 0, 1, 1, 1, 1}, t, s, alpha); }) == ErrorKind::NotAChild);
  const auto sp = split_of({0, 2, 2, 0, 1, 1, 1, 1}, {0, 1});
  CHECK(sp.at(0) == 0.5);
  CHECK(sp.at(2) == 0.5);
}

TEST_CASE("Monte-Carlo p_comp at n = 40") {
  const auto e = empirical_pcomp(fixtures::pcomp_counts(), fixtures::pcomp_splits(), 100000, 3);
  CHECK(e.exact > 0.0);
  CHECK(std::abs(e.estimate - e.exact) <= 3 * e.sigma);
  const auto al = alpha_from_counts(fixtures::pcomp_counts());
  SplitMap full = fixtures::pcomp_splits();
  CHECK(e.exact == doctest::Approx(pcomp_exact_level2(al, full, 40)).epsilon(1e-12));
}

TEST_CASE("matrix hole fixing") {
  CHECK(fix_matrix_holes({BrokenMatmul{2, 3, 2, {}}}, 1).result == matmul_tensor(2, 3, 2));
  std::vector<BrokenMatmul> three(3, BrokenMatmul{2, 2, 2, {{0, 0}, {1, 1}}});
  CHECK(kind_of([&] { fix_matrix_holes(three, 1); }) == ErrorKind::PreconditionUnmet);
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    CHECK(fix_matrix_holes(fixtures::half_broken_matmuls(seed), seed).result == matmul_tensor(2, 2, 2));
}

TEST_CASE("shuffles permute available blocks") {
  for (const StandardForm& f :
       {fixtures::tiny_standard_form(),
        StandardForm{2, 2, {StandardFactor{{1, 1, 2, 2}, 2, SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}}},
                            StandardFactor{{0, 2, 2, 2}, 2, SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}}}}}}) {
    const auto av = available_z_blocks(f);
    const std::set<std::vector<int>> avs(av.begin(), av.end());
    SimRng rng(5);
    for (int t = 0; t < 50; ++t) {
      const auto g = random_shuffle(f, rng);
      std::set<std::vector<int>> image;
      for (const auto& b : av) {
        const auto gb = shuffle_block(f, g, b);
        CHECK(is_available(f, gb));
        image.insert(gb);
      }
      CHECK(image == avs);
    }
    const auto tstar = build_standard_form(f);
    CHECK(shuffle_tensor(f, random_shuffle(f, rng), tstar) == tstar);
  }
}

TEST_CASE("a shuffled hole lands uniformly") {
  const StandardForm f{2, 2, {StandardFactor{{1, 1, 2, 2}, 4, SplitDistribution{2, 2, {{0, 0.25}, {1, 0.5}, {2, 0.25}}}}}};
  const auto av = available_z_blocks(f);
  REQUIRE(av.size() == 12);
  std::map<std::vector<int>, long> cnt;
  SimRng rng(9);
  const int trials = 6000;
  for (int t = 0; t < trials; ++t) ++cnt[shuffle_block(f, random_shuffle(f, rng), av[0])];
  CHECK(cnt.size() == av.size());
  double chi2 = 0;
  const double e = double(trials) / av.size();
  for (const auto& b : av) chi2 += (cnt[b] - e) * (cnt[b] - e) / e;
  CHECK(chi2 < 11 + 3 * std::sqrt(22.0));
}

TEST_CASE("standard-form hole fixing") {
  const auto f = fixtures::tiny_standard_form();
  const auto tstar = build_standard_form(f);
  CHECK(available_z_blocks(f).size() == 2);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto out = fix_standard_holes(f, fixtures::half_broken_standard(f, tstar, seed), seed);
    REQUIRE(out.outputs.size() == 1);
    CHECK(out.outputs[0] == tstar);
  }
  // Hole-free: floor(12 / (N l + 2)) = 2 copies.
  std::vector<BrokenCopy> whole(12, break_copy(f, tstar, {}));
  const auto out = fix_standard_holes(f, whole, 1);
  CHECK(out.outputs.size() == 2);
  for (const auto& o : out.outputs) CHECK(o == tstar);
  std::vector<BrokenCopy> few(3, break_copy(f, tstar, {}));
  CHECK(kind_of([&] { fix_standard_holes(f, few, 1); }) == ErrorKind::PreconditionUnmet);
  CHECK(break_copy(f, tstar, {available_z_blocks(f)[0]}).eta == 0.5);
}

TEST_CASE("level-2 pipeline certificate") {
  const auto p = fixtures::pipeline_n4();
  int with_copies = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = level2_pipeline(p, seed);
    CHECK(r.cert.passed());
    if (!r.copies.empty()) {
      ++with_copies;
      CHECK(r.cert.block_triples_scanned > 0);
      CHECK(r.cert.terms_compared > 0);
    }
  }
  CHECK(with_copies >= 2);
}

TEST_CASE("matmul-only pipeline copies are matrix products") {
  Level2SimParams p;
  p.q = 2;
  p.counts = {{Component{0, 1, 3, 2}, 2}, {Component{1, 0, 3, 2}, 2}};
  int copies = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = level2_pipeline(p, seed);
    CHECK(r.cert.passed());
    for (const auto& c : r.copies) {
      CHECK(c.matmul);
      ++copies;
    }
  }
  CHECK(copies > 0);
}

TEST_CASE("a forced small modulus creates holes and still certifies") {
  auto p = fixtures::pipeline_holes();
  p.modulus = 3;
  long holes = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto r = level2_pipeline(p, seed);
    CHECK(r.cert.passed());
    for (const auto& c : r.copies) holes += c.holes;
  }
  CHECK(holes > 0);
}

TEST_CASE("random streams") {
  SimRng a(1, {2}), b(1, {2}), c(1, {3});
  CHECK(a.below(1000000) == b.below(1000000));
  CHECK(a.split(4).below(1u << 30) == b.split(4).below(1u << 30));
  CHECK(SimRng(1, {2}).below(1u << 30) != c.below(1u << 30));
  const auto perm = a.permutation(10);
  CHECK(std::set<int>(perm.begin(), perm.end()).size() == 10);
}
