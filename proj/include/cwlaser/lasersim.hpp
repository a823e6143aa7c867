#pragma once

// Desk-scale simulator: explicit sparse tensors, CW powers, Salem-Spencer
// sets, hashing, compatibility zeroing and the two hole-fixing constructions.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cwlaser/combinat.hpp"
#include "cwlaser/verifier.hpp"

namespace cwl {

// ---- randomness ----

// Every stream is an mt19937_64 seeded through std::seed_seq from the root
// seed and a path of stream ids, so sub-streams never depend on how much
// another stream consumed.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed, std::vector<std::uint64_t> path = {});
  SimRng split(std::uint64_t stream) const;
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)
  double uniform01();
  std::vector<int> permutation(int n);
  std::mt19937_64& engine() { return eng_; }

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::mt19937_64 eng_;
};

// ---- sparse tensors ----

inline constexpr std::uint32_t kFieldPrime = 101;
inline constexpr std::size_t kDefaultTermCap = 10'000'000;

struct Term {
  std::uint64_t x = 0, y = 0, z = 0;
  std::uint32_t c = 1;  // in [1, kFieldPrime)
};
bool operator<(const Term& a, const Term& b);
bool operator==(const Term& a, const Term& b);

// Variables are 0..n-1 per axis. Terms are kept sorted by (x, y, z) with
// duplicates merged and zero coefficients dropped.
struct SparseTensor {
  std::uint64_t nx = 0, ny = 0, nz = 0;
  std::vector<Term> terms;

  SparseTensor() = default;
  SparseTensor(std::uint64_t x, std::uint64_t y, std::uint64_t z) : nx(x), ny(y), nz(z) {}

  void add(std::uint64_t x, std::uint64_t y, std::uint64_t z, std::uint32_t c = 1);
  void canonicalize();
  std::size_t size() const { return terms.size(); }
  bool same_universe(const SparseTensor& o) const { return nx == o.nx && ny == o.ny && nz == o.nz; }
};
bool operator==(const SparseTensor& a, const SparseTensor& b);

SparseTensor matmul_tensor(long n, long m, long p);
// TooLarge when the product would exceed `cap` terms.
SparseTensor tensor_product(const SparseTensor& a, const SparseTensor& b,
                            std::size_t cap = kDefaultTermCap);
SparseTensor direct_sum(const SparseTensor& a, const SparseTensor& b);
SparseTensor rotate_tensor(const SparseTensor& t);  // (x, y, z) -> (y, z, x)
SparseTensor swap_tensor(const SparseTensor& t);    // (x, y, z) -> (y, x, z)
SparseTensor sym3(const SparseTensor& t, std::size_t cap = kDefaultTermCap);
SparseTensor sym6(const SparseTensor& t, std::size_t cap = kDefaultTermCap);

using VarPredicate = std::function<bool(std::uint64_t)>;
// Keeps exactly the terms whose three variables are retained; universes unchanged.
SparseTensor zero_out(const SparseTensor& t, const VarPredicate& keep_x, const VarPredicate& keep_y,
                      const VarPredicate& keep_z);
// Restriction to the given variable sets, relabelled 0.. in increasing order.
SparseTensor subtensor(const SparseTensor& t, const std::set<std::uint64_t>& xs,
                       const std::set<std::uint64_t>& ys, const std::set<std::uint64_t>& zs);
// Relabels variables; maps must be injective on the used variables.
SparseTensor rename(const SparseTensor& t, const std::function<std::uint64_t(std::uint64_t)>& fx,
                    const std::function<std::uint64_t(std::uint64_t)>& fy,
                    const std::function<std::uint64_t(std::uint64_t)>& fz);
// Glues copies over identical universes (coefficients add). UniverseMismatch otherwise.
SparseTensor identify(const std::vector<SparseTensor>& copies);

// Dimensions (n, m, p) when t, restricted to the variables it uses and with
// all coefficients 1, is <n, m, p> up to relabelling.
std::optional<std::array<long, 3>> is_matmul(const SparseTensor& t);

// One term per line: "x y z c".
std::string dump_tensor(const SparseTensor& t);

// ---- CW tensor and its partitions ----

// CW_q^{(x)N}. A variable is the base-(q+2) number of its N digits, digit 0
// first; digit d has level-1 index 0 (d = 0), 1 (1..q) or 2 (q + 1).
SparseTensor build_cw_power(int q, int N, std::size_t cap = kDefaultTermCap);
std::vector<int> level1_indices(int q, int N, std::uint64_t var);
// Level-`level` index sequence: sums over runs of 2^(level-1) digits.
std::vector<int> block_index(int q, int N, int level, std::uint64_t var);
// T_{i,j,k} of CW_q^{(x)2^(level-1)}, over the full universes of that power.
SparseTensor cw_component(int q, const Component& c);

struct BlockIndex {
  int level = 1;
  std::vector<int> idx;
};

struct BlockTriple {
  int level = 2;
  std::vector<int> I, J, K;
};
bool operator<(const BlockTriple& a, const BlockTriple& b);
bool operator==(const BlockTriple& a, const BlockTriple& b);

// Component counts at one level, summing to n.
using ComponentCounts = std::map<Component, int>;

ComponentCounts counts_from_alpha(const JointDistribution& alpha, int n);
JointDistribution alpha_from_counts(const ComponentCounts& counts);
bool obeys(const BlockTriple& t, const ComponentCounts& counts);

// All triples whose X, Y and Z blocks have the marginal types of `counts`.
struct TripleUniverse {
  int level = 2;
  int n = 0;
  std::vector<std::vector<int>> xblocks, yblocks, zblocks;
  std::vector<BlockTriple> triples;  // N_triple of them
  long n_alpha = 0;                  // triples obeying the joint counts
};
TripleUniverse enumerate_triples(int level, const ComponentCounts& counts);

// ---- Salem-Spencer ----

bool is_ap_free_mod(const std::vector<int>& a, int M);
// M <= 64: a maximum AP-free subset (exhaustive, contains 0). Larger M: the
// better of the base-3 {0,1}-digit set and Behrend digit spheres, all below M/2.
std::vector<int> salem_spencer(int M);

// ---- hashing ----

struct HashConfig {
  std::uint64_t M = 3;
  std::uint64_t b0 = 0;
  std::vector<std::uint64_t> w;  // w[0] .. w[n]
  std::uint64_t seed = 0;
  // EvenModulus; ValidationError when M is not prime or coefficients are >= M.
  void validate() const;
};
bool is_prime(std::uint64_t m);
std::uint64_t next_prime(std::uint64_t m);  // smallest odd prime >= m
HashConfig random_hash_config(std::uint64_t M, int n, std::uint64_t seed);
std::uint64_t hash_block(const HashConfig& cfg, const BlockIndex& block, Axis axis);

struct HashingResult {
  std::vector<BlockTriple> retained;
  long after_hash = 0;       // triples whose three hashes lie in B
  long pruned_shared = 0;    // removed by collision resolution
  long pruned_predicate = 0; // removed by the consistency predicate
  std::set<std::vector<int>> zeroed_x, zeroed_y, zeroed_z;
  bool certified = false;    // post-state checks all passed
  std::vector<std::string> failures;
};

// Keeps triples whose hashes all lie in the Salem-Spencer set of M, then
// zeroes shared X- and Y-blocks (and Z-blocks in symmetric mode) in
// ascending block order, then X-blocks of triples failing `consistent`.
HashingResult hashing_round(const std::vector<BlockTriple>& triples, const HashConfig& cfg,
                            HashingMode mode,
                            const std::function<bool(const BlockTriple&)>& consistent);

// ---- compatibility ----

enum class CompatForm { Level2, General };

// Fraction of positions t in S with khat[2t] == kl; khat is the child sequence.
std::map<int, double> split_of(const std::vector<int>& khat, const std::vector<int>& positions);

// Level2: split on S_{1,1,2} equals splits[(1,1,2)] and on S_{0,2,2},
// S_{2,0,2} equals their splits. General: the per-k average split and the
// per-component split of every component with i = 0 or j = 0.
// NotAChild when khat does not refine the triple's K.
bool compatibility(const std::vector<int>& khat, const BlockTriple& t, const SplitMap& splits,
                   const JointDistribution& alpha, CompatForm form = CompatForm::Level2);

// Monte-Carlo estimate of p_comp: a fixed typical small Z-block of a fixed
// Z_K against uniformly random triples obeying the counts that contain Z_K.
struct PcompEstimate {
  double estimate = 0.0;
  double sigma = 0.0;  // binomial standard error
  double exact = 0.0;  // pcomp_exact_level2
  long samples = 0;
  std::uint64_t seed = 0;
};
PcompEstimate empirical_pcomp(const ComponentCounts& counts, const SplitMap& splits, long samples,
                              std::uint64_t seed);

// ---- standard form tensors and holes ----

struct StandardFactor {
  Component component;  // level l
  int n = 1;
  SplitDistribution split;  // Z-split; counts n * split(kl) must be integral
};

struct StandardForm {
  int q = 2;
  int level = 2;
  std::vector<StandardFactor> factors;
  int N() const;
  void validate() const;  // ParameterMismatch / NonIntegerCounts
};

// Small blocks are level-(l-1) sequences of length 2N.
std::vector<std::vector<int>> available_z_blocks(const StandardForm& f);
bool is_available(const StandardForm& f, const std::vector<int>& khat);
// Variables live in CW_q^{(x) N 2^(l-1)}.
SparseTensor build_standard_form(const StandardForm& f, std::size_t cap = kDefaultTermCap);
std::vector<int> small_z_block(const StandardForm& f, std::uint64_t zvar);

struct BrokenCopy {
  SparseTensor tensor;
  std::set<std::vector<int>> holes;
  long available = 0;
  double eta = 1.0;  // fraction of non-holes
};
BrokenCopy break_copy(const StandardForm& f, const SparseTensor& tstar,
                      const std::set<std::vector<int>>& holes);

// An element of the shuffling group: one permutation of units per factor.
using Shuffle = std::vector<std::vector<int>>;
Shuffle random_shuffle(const StandardForm& f, SimRng& rng);
std::vector<int> shuffle_block(const StandardForm& f, const Shuffle& g, const std::vector<int>& block);
SparseTensor shuffle_tensor(const StandardForm& f, const Shuffle& g, const SparseTensor& t);

struct StandardHoleFix {
  std::vector<SparseTensor> outputs;  // each equal to T* term for term
  int groups = 0;
  int tries = 0;  // shuffle draws over all groups
  std::uint64_t seed = 0;
};
// Groups copies with N l + 1 <= sum eta <= N l + 2, repairs each group with
// random shuffles, zeroing and identification, and returns
// floor(sum eta / (N l + 2)) copies of T*. PreconditionUnmet when that is 0.
StandardHoleFix fix_standard_holes(const StandardForm& f, const std::vector<BrokenCopy>& copies,
                                   std::uint64_t seed);

struct BrokenMatmul {
  long N = 1, M = 1, P = 1;
  std::set<std::pair<long, long>> holes;  // positions (k, i) of z_{k,i}
  double eta() const;
  SparseTensor tensor() const;
};

struct MatrixHoleFix {
  SparseTensor result;  // equals <N, M, P>
  int tries = 0;
  std::uint64_t seed = 0;
};
// A hole-free copy is returned as is. Otherwise PreconditionUnmet unless
// sum eta >= log2(N P) + 1; SolverFailure after 1000 unlucky draws.
MatrixHoleFix fix_matrix_holes(const std::vector<BrokenMatmul>& copies, std::uint64_t seed);

// ---- level-2 pipeline ----

struct Level2SimParams {
  int q = 2;
  ComponentCounts counts;  // level 2, summing to n <= 6
  SplitDistribution A{2, 2, {{0, 0.25}, {1, 0.5}, {2, 0.25}}};  // on S_{1,1,2}
  SplitDistribution B{2, 2, {{0, 0.5}, {2, 0.5}}};              // on S_{0,2,2}, S_{2,0,2}
  std::uint64_t modulus = 0;  // 0: smallest prime >= 4 N_triple / N_x
  // Build both tensors and compare terms when a copy has at most this many terms.
  std::size_t term_check_cap = 200'000;
  int n() const;
};

struct Level2Copy {
  BlockTriple triple;
  long available = 0;  // Z-blocks of T*
  long holes = 0;
  double eta = 1.0;
  bool matmul = false;  // is_matmul on the term-level copy, when built
};

struct IndependenceCertificate {
  bool hashing = false;       // hashing_round post-state
  bool zeroing = false;       // incompatible small Z-blocks have no terms with X_I, Y_J
  bool tstar = false;         // surviving small triples are exactly those of T*
  bool terms_match = false;   // term-level copy equals T* where built (vacuous otherwise)
  bool independent = false;   // no cross terms between retained copies
  long block_triples_scanned = 0;
  long terms_compared = 0;
  std::vector<std::string> failures;
  bool passed() const { return hashing && zeroing && tstar && terms_match && independent; }
};

struct Level2SimResult {
  std::uint64_t seed = 0;
  std::uint64_t M = 0;
  long n_x = 0, n_z = 0, n_triple = 0, n_alpha = 0;
  double p_comp = 0.0;  // exact, for the sizing check
  bool sizing_ok = false;  // M >= 4 N_triple / N_x and N_x <= N_z / p_comp
  std::vector<Level2Copy> copies;
  IndependenceCertificate cert;
};

Level2SimResult level2_pipeline(const Level2SimParams& p, std::uint64_t seed);

}  // namespace cwl
