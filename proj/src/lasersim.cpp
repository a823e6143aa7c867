#include "cwlaser/lasersim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <tuple>

#include "cwlaser/error.hpp"

namespace cwl {

// ---- randomness ----

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, const std::vector<std::uint64_t>& path) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  words.push_back(static_cast<std::uint32_t>(path.size()));
  std::seed_seq sq(words.begin(), words.end());
  return std::mt19937_64(sq);
}

}  // namespace

SimRng::SimRng(std::uint64_t seed, std::vector<std::uint64_t> path)
    : seed_(seed), path_(std::move(path)), eng_(seeded_engine(seed_, path_)) {}

SimRng SimRng::split(std::uint64_t stream) const {
  auto p = path_;
  p.push_back(stream);
  return SimRng(seed_, std::move(p));
}

std::uint64_t SimRng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::ValidationError, "below(0)");
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
}

double SimRng::uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

std::vector<int> SimRng::permutation(int n) {
  std::vector<int> p(static_cast<size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), eng_);
  return p;
}

// ---- sparse tensors ----

bool operator<(const Term& a, const Term& b) {
  return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
}
bool operator==(const Term& a, const Term& b) {
  return a.x == b.x && a.y == b.y && a.z == b.z && a.c == b.c;
}

void SparseTensor::add(std::uint64_t x, std::uint64_t y, std::uint64_t z, std::uint32_t c) {
  if (x >= nx || y >= ny || z >= nz)
    throw Error(ErrorKind::UniverseMismatch, "variable outside the tensor's universe");
  c %= kFieldPrime;
  if (c != 0) terms.push_back(Term{x, y, z, c});
}

void SparseTensor::canonicalize() {
  std::sort(terms.begin(), terms.end());
  std::vector<Term> out;
  out.reserve(terms.size());
  for (const Term& t : terms) {
    if (!out.empty() && out.back().x == t.x && out.back().y == t.y && out.back().z == t.z) {
      out.back().c = (out.back().c + t.c) % kFieldPrime;
    } else {
      out.push_back(t);
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Term& t) { return t.c == 0; }),
            out.end());
  terms = std::move(out);
}

bool operator==(const SparseTensor& a, const SparseTensor& b) {
  return a.same_universe(b) && a.terms == b.terms;
}

SparseTensor matmul_tensor(long n, long m, long p) {
  if (n < 1 || m < 1 || p < 1) throw Error(ErrorKind::ValidationError, "matmul dimensions must be positive");
  SparseTensor t(static_cast<std::uint64_t>(n * m), static_cast<std::uint64_t>(m * p),
                 static_cast<std::uint64_t>(p * n));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j)
      for (long k = 0; k < p; ++k)
        t.add(static_cast<std::uint64_t>(i * m + j), static_cast<std::uint64_t>(j * p + k),
              static_cast<std::uint64_t>(k * n + i));
  t.canonicalize();
  return t;
}

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / 4 / a)
    throw Error(ErrorKind::TooLarge, "universe size overflows");
  return a * b;
}

}  // namespace

SparseTensor tensor_product(const SparseTensor& a, const SparseTensor& b, std::size_t cap) {
  if (a.size() != 0 && b.size() > cap / a.size())
    throw Error(ErrorKind::TooLarge, "product has " + std::to_string(a.size()) + " x " +
                                         std::to_string(b.size()) + " terms, cap " +
                                         std::to_string(cap));
  SparseTensor t(checked_mul(a.nx, b.nx), checked_mul(a.ny, b.ny), checked_mul(a.nz, b.nz));
  t.terms.reserve(a.size() * b.size());
  for (const Term& u : a.terms)
    for (const Term& v : b.terms)
      t.terms.push_back(Term{u.x * b.nx + v.x, u.y * b.ny + v.y, u.z * b.nz + v.z,
                             static_cast<std::uint32_t>((std::uint64_t{u.c} * v.c) % kFieldPrime)});
  t.canonicalize();
  return t;
}

SparseTensor direct_sum(const SparseTensor& a, const SparseTensor& b) {
  SparseTensor t(a.nx + b.nx, a.ny + b.ny, a.nz + b.nz);
  t.terms = a.terms;
  for (const Term& v : b.terms) t.terms.push_back(Term{v.x + a.nx, v.y + a.ny, v.z + a.nz, v.c});
  t.canonicalize();
  return t;
}

SparseTensor rotate_tensor(const SparseTensor& t) {
  SparseTensor r(t.ny, t.nz, t.nx);
  for (const Term& u : t.terms) r.terms.push_back(Term{u.y, u.z, u.x, u.c});
  r.canonicalize();
  return r;
}

SparseTensor swap_tensor(const SparseTensor& t) {
  SparseTensor r(t.ny, t.nx, t.nz);
  for (const Term& u : t.terms) r.terms.push_back(Term{u.y, u.x, u.z, u.c});
  r.canonicalize();
  return r;
}

SparseTensor sym3(const SparseTensor& t, std::size_t cap) {
  const SparseTensor r1 = rotate_tensor(t);
  return tensor_product(tensor_product(t, r1, cap), rotate_tensor(r1), cap);
}

SparseTensor sym6(const SparseTensor& t, std::size_t cap) {
  const SparseTensor s = sym3(t, cap);
  return tensor_product(s, swap_tensor(s), cap);
}

SparseTensor zero_out(const SparseTensor& t, const VarPredicate& keep_x, const VarPredicate& keep_y,
                      const VarPredicate& keep_z) {
  SparseTensor r(t.nx, t.ny, t.nz);
  for (const Term& u : t.terms)
    if (keep_x(u.x) && keep_y(u.y) && keep_z(u.z)) r.terms.push_back(u);
  return r;  // order preserved
}

SparseTensor subtensor(const SparseTensor& t, const std::set<std::uint64_t>& xs,
                       const std::set<std::uint64_t>& ys, const std::set<std::uint64_t>& zs) {
  auto index = [](const std::set<std::uint64_t>& s) {
    std::map<std::uint64_t, std::uint64_t> m;
    for (auto v : s) m.emplace(v, m.size());
    return m;
  };
  const auto ix = index(xs), iy = index(ys), iz = index(zs);
  SparseTensor r(xs.size(), ys.size(), zs.size());
  for (const Term& u : t.terms) {
    auto a = ix.find(u.x), b = iy.find(u.y), c = iz.find(u.z);
    if (a != ix.end() && b != iy.end() && c != iz.end()) r.terms.push_back(Term{a->second, b->second, c->second, u.c});
  }
  r.canonicalize();
  return r;
}

SparseTensor rename(const SparseTensor& t, const std::function<std::uint64_t(std::uint64_t)>& fx,
                    const std::function<std::uint64_t(std::uint64_t)>& fy,
                    const std::function<std::uint64_t(std::uint64_t)>& fz) {
  SparseTensor r(t.nx, t.ny, t.nz);
  for (const Term& u : t.terms) r.add(fx(u.x), fy(u.y), fz(u.z), u.c);
  const size_t before = r.terms.size();
  r.canonicalize();
  if (r.terms.size() != before) throw Error(ErrorKind::ValidationError, "renaming is not injective");
  return r;
}

SparseTensor identify(const std::vector<SparseTensor>& copies) {
  if (copies.empty()) return SparseTensor{};
  SparseTensor r(copies[0].nx, copies[0].ny, copies[0].nz);
  for (const auto& c : copies) {
    if (!c.same_universe(r)) throw Error(ErrorKind::UniverseMismatch, "identified copies differ in universe");
    r.terms.insert(r.terms.end(), c.terms.begin(), c.terms.end());
  }
  r.canonicalize();
  return r;
}

std::optional<std::array<long, 3>> is_matmul(const SparseTensor& t) {
  if (t.terms.empty()) return std::nullopt;
  for (const Term& u : t.terms)
    if (u.c != 1) return std::nullopt;
  std::map<std::uint64_t, std::set<std::uint64_t>> xy, xz, yz;
  for (const Term& u : t.terms) {
    xy[u.x].insert(u.y);
    xz[u.x].insert(u.z);
    yz[u.y].insert(u.z);
  }
  // Neighbourhoods of one role must partition the other role's variables;
  // each class is one row/column index of the matrix product.
  auto classes = [](const std::map<std::uint64_t, std::set<std::uint64_t>>& nb, size_t universe,
                    std::map<std::uint64_t, long>& owner_class,
                    std::map<std::uint64_t, long>& member_class) -> long {
    std::map<std::set<std::uint64_t>, long> ids;
    for (const auto& [v, s] : nb) {
      auto [it, fresh] = ids.emplace(s, static_cast<long>(ids.size()));
      owner_class[v] = it->second;
      if (fresh)
        for (auto w : s)
          if (!member_class.emplace(w, it->second).second) return -1;
    }
    if (member_class.size() != universe) return -1;
    return static_cast<long>(ids.size());
  };
  std::set<std::uint64_t> ys, zs;
  for (const Term& u : t.terms) {
    ys.insert(u.y);
    zs.insert(u.z);
  }
  std::map<std::uint64_t, long> x_j, y_j, x_i, z_i, y_k, z_k;
  const long m = classes(xy, ys.size(), x_j, y_j);
  const long n = classes(xz, zs.size(), x_i, z_i);
  const long p = classes(yz, zs.size(), y_k, z_k);
  if (m < 0 || n < 0 || p < 0) return std::nullopt;
  if (static_cast<long>(xy.size()) != n * m || static_cast<long>(ys.size()) != m * p ||
      static_cast<long>(zs.size()) != p * n || static_cast<long>(t.terms.size()) != n * m * p)
    return std::nullopt;
  std::set<std::pair<long, long>> xs_seen, ys_seen, zs_seen;
  for (const auto& [x, j] : x_j)
    if (!xs_seen.insert({x_i.at(x), j}).second) return std::nullopt;
  for (const auto& [y, j] : y_j)
    if (!ys_seen.insert({j, y_k.at(y)}).second) return std::nullopt;
  for (const auto& [z, k] : z_k)
    if (!zs_seen.insert({k, z_i.at(z)}).second) return std::nullopt;
  for (const Term& u : t.terms)
    if (x_j.at(u.x) != y_j.at(u.y) || y_k.at(u.y) != z_k.at(u.z) || z_i.at(u.z) != x_i.at(u.x))
      return std::nullopt;
  return std::array<long, 3>{n, m, p};
}

std::string dump_tensor(const SparseTensor& t) {
  std::ostringstream os;
  os << "# " << t.nx << " " << t.ny << " " << t.nz << " " << t.size() << "\n";
  for (const Term& u : t.terms) os << u.x << " " << u.y << " " << u.z << " " << u.c << "\n";
  return os.str();
}

// ---- CW tensor ----

namespace {

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r = checked_mul(r, b);
  return r;
}

int digit_label(int q, int d) { return d == 0 ? 0 : (d <= q ? 1 : 2); }

}  // namespace

SparseTensor build_cw_power(int q, int N, std::size_t cap) {
  if (q < 1 || N < 1) throw Error(ErrorKind::ValidationError, "build_cw_power needs q >= 1, N >= 1");
  const std::uint64_t base_terms = 3 * static_cast<std::uint64_t>(q) + 3;
  double count = std::pow(static_cast<double>(base_terms), N);
  if (count > static_cast<double>(cap))
    throw Error(ErrorKind::TooLarge, "CW_" + std::to_string(q) + "^" + std::to_string(N) + " has " +
                                         std::to_string(static_cast<long double>(count)) + " terms");
  std::vector<std::array<int, 3>> base;
  for (int i = 1; i <= q; ++i) {
    base.push_back({i, i, 0});
    base.push_back({i, 0, i});
    base.push_back({0, i, i});
  }
  base.push_back({0, 0, q + 1});
  base.push_back({0, q + 1, 0});
  base.push_back({q + 1, 0, 0});
  const std::uint64_t B = static_cast<std::uint64_t>(q) + 2;
  const std::uint64_t U = ipow(B, N);
  SparseTensor t(U, U, U);
  t.terms.reserve(static_cast<size_t>(count));
  std::vector<size_t> pick(static_cast<size_t>(N), 0);
  while (true) {
    std::uint64_t x = 0, y = 0, z = 0, w = 1;
    for (int p = 0; p < N; ++p) {
      const auto& b = base[pick[static_cast<size_t>(p)]];
      x += w * static_cast<std::uint64_t>(b[0]);
      y += w * static_cast<std::uint64_t>(b[1]);
      z += w * static_cast<std::uint64_t>(b[2]);
      w *= B;
    }
    t.terms.push_back(Term{x, y, z, 1});
    int p = 0;
    while (p < N && ++pick[static_cast<size_t>(p)] == base.size()) pick[static_cast<size_t>(p++)] = 0;
    if (p == N) break;
  }
  t.canonicalize();
  return t;
}

std::vector<int> level1_indices(int q, int N, std::uint64_t var) {
  std::vector<int> out(static_cast<size_t>(N));
  const std::uint64_t B = static_cast<std::uint64_t>(q) + 2;
  for (int p = 0; p < N; ++p) {
    out[static_cast<size_t>(p)] = digit_label(q, static_cast<int>(var % B));
    var /= B;
  }
  return out;
}

std::vector<int> block_index(int q, int N, int level, std::uint64_t var) {
  const int run = 1 << (level - 1);
  if (level < 1 || N % run != 0)
    throw Error(ErrorKind::WrongLevel, "length " + std::to_string(N) + " is not a multiple of 2^(level-1)");
  const auto l1 = level1_indices(q, N, var);
  std::vector<int> out(static_cast<size_t>(N / run), 0);
  for (int p = 0; p < N; ++p) out[static_cast<size_t>(p / run)] += l1[static_cast<size_t>(p)];
  return out;
}

SparseTensor cw_component(int q, const Component& c) {
  if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
  const int P = 1 << (c.level - 1);
  const SparseTensor full = build_cw_power(q, P);
  auto sum_is = [&](int target) {
    return [=](std::uint64_t v) {
      const auto b = block_index(q, P, c.level, v);
      return b[0] == target;
    };
  };
  return zero_out(full, sum_is(c.i), sum_is(c.j), sum_is(c.k));
}

bool operator<(const BlockTriple& a, const BlockTriple& b) {
  return std::tie(a.level, a.I, a.J, a.K) < std::tie(b.level, b.I, b.J, b.K);
}
bool operator==(const BlockTriple& a, const BlockTriple& b) {
  return a.level == b.level && a.I == b.I && a.J == b.J && a.K == b.K;
}

ComponentCounts counts_from_alpha(const JointDistribution& alpha, int n) {
  ComponentCounts out;
  int total = 0;
  for (const auto& [c, m] : alpha.mass) {
    const double x = m * n;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9)
      throw Error(ErrorKind::NonIntegerCounts, to_string(c) + " has count " + std::to_string(x));
    if (r > 0) out[c] = static_cast<int>(r);
    total += static_cast<int>(r);
  }
  if (total != n) throw Error(ErrorKind::NonIntegerCounts, "counts do not sum to n");
  return out;
}

JointDistribution alpha_from_counts(const ComponentCounts& counts) {
  if (counts.empty()) throw Error(ErrorKind::ZeroMass, "no components");
  JointDistribution a{counts.begin()->first.level, {}};
  int n = 0;
  for (const auto& [c, k] : counts) n += k;
  if (n <= 0) throw Error(ErrorKind::ZeroMass, "counts sum to zero");
  for (const auto& [c, k] : counts)
    if (k > 0) a.mass[c] = static_cast<double>(k) / n;
  return a;
}

bool obeys(const BlockTriple& t, const ComponentCounts& counts) {
  ComponentCounts seen;
  for (size_t p = 0; p < t.I.size(); ++p) ++seen[Component{t.I[p], t.J[p], t.K[p], t.level}];
  ComponentCounts want;
  for (const auto& [c, k] : counts)
    if (k > 0) want[c] = k;
  return seen == want;
}

namespace {

std::vector<std::vector<int>> distinct_permutations(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::vector<int>> out;
  do out.push_back(v);
  while (std::next_permutation(v.begin(), v.end()));
  return out;
}

int count_total(const ComponentCounts& counts) {
  int n = 0;
  for (const auto& [c, k] : counts) {
    if (k < 0) throw Error(ErrorKind::ValidationError, "negative count");
    n += k;
  }
  return n;
}

}  // namespace

TripleUniverse enumerate_triples(int level, const ComponentCounts& counts) {
  TripleUniverse u;
  u.level = level;
  u.n = count_total(counts);
  if (u.n <= 0) throw Error(ErrorKind::ZeroMass, "empty component counts");
  std::array<std::vector<int>, 3> types;
  for (const auto& [c, k] : counts) {
    if (c.level != level) throw Error(ErrorKind::WrongLevel, "component " + to_string(c));
    for (int r = 0; r < k; ++r)
      for (int ax = 0; ax < 3; ++ax) types[static_cast<size_t>(ax)].push_back(c.at(ax));
  }
  u.xblocks = distinct_permutations(types[0]);
  u.yblocks = distinct_permutations(types[1]);
  u.zblocks = distinct_permutations(types[2]);
  std::sort(types[2].begin(), types[2].end());
  const int total = level_total(level);
  for (const auto& I : u.xblocks)
    for (const auto& J : u.yblocks) {
      std::vector<int> K(I.size());
      bool ok = true;
      for (size_t p = 0; p < I.size() && ok; ++p) {
        K[p] = total - I[p] - J[p];
        ok = K[p] >= 0;
      }
      if (!ok) continue;
      std::vector<int> s = K;
      std::sort(s.begin(), s.end());
      if (s != types[2]) continue;
      BlockTriple t{level, I, J, K};
      if (obeys(t, counts)) ++u.n_alpha;
      u.triples.push_back(std::move(t));
    }
  return u;
}

// ---- Salem-Spencer ----

namespace {

// Values b with 2b = a + c (mod M).
std::vector<int> midpoints(int a, int c, int M) {
  const int s = (a + c) % M;
  if (M % 2 == 1) {
    const int inv2 = (M + 1) / 2;
    return {static_cast<int>((static_cast<long>(s) * inv2) % M)};
  }
  if (s % 2 != 0) return {};
  return {s / 2, (s / 2 + M / 2) % M};
}

struct ApSearch {
  int M;
  int best_size = 0;
  std::vector<int> best, cur;

  std::uint64_t forbid_after_adding(int x, std::uint64_t forbidden) const {
    auto bit = [](int v) { return std::uint64_t{1} << v; };
    auto mod = [&](long v) { return static_cast<int>(((v % M) + M) % M); };
    for (int a : cur) {
      forbidden |= bit(mod(2L * x - a));
      forbidden |= bit(mod(2L * a - x));
      for (int b : midpoints(a, x, M)) forbidden |= bit(b);
    }
    return forbidden;
  }

  void run(int last, std::uint64_t forbidden) {
    if (static_cast<int>(cur.size()) > best_size) {
      best_size = static_cast<int>(cur.size());
      best = cur;
    }
    std::uint64_t cand = 0;
    for (int v = last + 1; v < M; ++v)
      if (!((forbidden >> v) & 1)) cand |= std::uint64_t{1} << v;
    if (static_cast<int>(cur.size()) + __builtin_popcountll(cand) <= best_size) return;
    for (int v = last + 1; v < M; ++v) {
      if (!((cand >> v) & 1)) continue;
      cur.push_back(v);
      run(v, forbid_after_adding(v, forbidden));
      cur.pop_back();
      cand &= ~(std::uint64_t{1} << v);
      if (static_cast<int>(cur.size()) + __builtin_popcountll(cand) <= best_size) return;
    }
  }
};

std::vector<int> behrend_best(int M) {
  const int lim = (M - 1) / 2;  // a + c and 2b stay below M, so no wrap-around
  std::vector<int> best;
  for (int d = 3; d <= std::max(3, lim + 1); ++d) {
    const int maxdigit = (d - 1) / 2;
    std::map<long, std::vector<int>> by_norm;
    for (int v = 0; v <= lim; ++v) {
      int x = v;
      long norm = 0;
      bool ok = true;
      while (x > 0 && ok) {
        const int dg = x % d;
        ok = dg <= maxdigit;
        norm += static_cast<long>(dg) * dg;
        x /= d;
      }
      if (ok) by_norm[d == 3 ? 0 : norm].push_back(v);
    }
    for (auto& [nrm, s] : by_norm)
      if (s.size() > best.size()) best = s;
  }
  return best;
}

}  // namespace

bool is_ap_free_mod(const std::vector<int>& a, int M) {
  if (M < 1) throw Error(ErrorKind::ValidationError, "modulus must be positive");
  std::set<int> s;
  for (int v : a) {
    if (v < 0 || v >= M) return false;
    s.insert(v);
  }
  for (int x : s)
    for (int c : s)
      for (int b : midpoints(x, c, M))
        if (s.count(b) && !(x == c && c == b)) return false;
  return true;
}

std::vector<int> salem_spencer(int M) {
  if (M < 1) throw Error(ErrorKind::ValidationError, "modulus must be positive");
  static std::mutex mu;
  static std::map<int, std::vector<int>> memo;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = memo.find(M);
    if (it != memo.end()) return it->second;
  }
  std::vector<int> out;
  if (M <= 64) {
    ApSearch s{M, 0, {}, {0}};
    s.run(0, s.forbid_after_adding(0, 0));
    out = s.best;
  } else {
    out = behrend_best(M);
  }
  if (!is_ap_free_mod(out, M))
    throw Error(ErrorKind::SolverFailure, "Salem-Spencer set failed its AP check");
  std::lock_guard<std::mutex> lock(mu);
  memo[M] = out;
  return out;
}

// ---- hashing ----

bool is_prime(std::uint64_t m) {
  if (m < 2) return false;
  for (std::uint64_t d = 2; d * d <= m; ++d)
    if (m % d == 0) return false;
  return true;
}

std::uint64_t next_prime(std::uint64_t m) {
  if (m <= 3) return 3;
  std::uint64_t v = m % 2 == 0 ? m + 1 : m;
  while (!is_prime(v)) v += 2;
  return v;
}

void HashConfig::validate() const {
  if (M % 2 == 0) throw Error(ErrorKind::EvenModulus, "hash modulus " + std::to_string(M) + " is even");
  if (!is_prime(M)) throw Error(ErrorKind::ValidationError, "hash modulus " + std::to_string(M) + " is not prime");
  if (M >= (std::uint64_t{1} << 31)) throw Error(ErrorKind::TooLarge, "hash modulus too large");
  if (b0 >= M) throw Error(ErrorKind::ValidationError, "b0 >= M");
  for (auto v : w)
    if (v >= M) throw Error(ErrorKind::ValidationError, "hash coefficient >= M");
  if (w.empty()) throw Error(ErrorKind::ValidationError, "hash needs w0");
}

HashConfig random_hash_config(std::uint64_t M, int n, std::uint64_t seed) {
  HashConfig cfg;
  cfg.M = M;
  cfg.seed = seed;
  if (M % 2 == 0) throw Error(ErrorKind::EvenModulus, "hash modulus " + std::to_string(M) + " is even");
  SimRng rng(seed, {0x68617368});
  cfg.b0 = rng.below(M);
  cfg.w.resize(static_cast<size_t>(n) + 1);
  for (auto& v : cfg.w) v = rng.below(M);
  cfg.validate();
  return cfg;
}

std::uint64_t hash_block(const HashConfig& cfg, const BlockIndex& block, Axis axis) {
  if (cfg.M % 2 == 0) throw Error(ErrorKind::EvenModulus, "hash modulus " + std::to_string(cfg.M) + " is even");
  if (block.idx.size() + 1 != cfg.w.size())
    throw Error(ErrorKind::ValidationError, "block length does not match the hash coefficients");
  const std::uint64_t M = cfg.M;
  const std::uint64_t total = static_cast<std::uint64_t>(level_total(block.level));
  std::uint64_t s = 0;
  for (size_t t = 0; t < block.idx.size(); ++t) {
    const std::uint64_t v = static_cast<std::uint64_t>(block.idx[t]);
    const std::uint64_t coef = axis == Axis::Z ? (total - v) % M : v % M;
    s = (s + cfg.w[t + 1] * coef) % M;
  }
  switch (axis) {
    case Axis::X:
      return (cfg.b0 + s) % M;
    case Axis::Y:
      return (cfg.b0 + cfg.w[0] + s) % M;
    case Axis::Z:
    default: {
      const std::uint64_t inv2 = (M + 1) / 2;
      return (cfg.b0 + ((cfg.w[0] + s) % M) * inv2) % M;
    }
  }
}

HashingResult hashing_round(const std::vector<BlockTriple>& triples, const HashConfig& cfg,
                            HashingMode mode,
                            const std::function<bool(const BlockTriple&)>& consistent) {
  cfg.validate();
  HashingResult r;
  const auto B = salem_spencer(static_cast<int>(cfg.M));
  const std::set<std::uint64_t> in_b(B.begin(), B.end());
  std::vector<BlockTriple> kept;
  for (const auto& t : triples) {
    const auto hx = hash_block(cfg, {t.level, t.I}, Axis::X);
    const auto hy = hash_block(cfg, {t.level, t.J}, Axis::Y);
    const auto hz = hash_block(cfg, {t.level, t.K}, Axis::Z);
    bool ok = true;
    if (!in_b.count(hx)) { r.zeroed_x.insert(t.I); ok = false; }
    if (!in_b.count(hy)) { r.zeroed_y.insert(t.J); ok = false; }
    if (!in_b.count(hz)) { r.zeroed_z.insert(t.K); ok = false; }
    if (!ok) continue;
    if (hx != hy || hy != hz) r.failures.push_back("hashes in B but unequal: Salem-Spencer violated");
    kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end());
  r.after_hash = static_cast<long>(kept.size());

  // Zero the smallest shared block until nothing forbidden is shared.
  const int axes = mode == HashingMode::Symmetric ? 3 : 2;
  while (true) {
    std::array<std::map<std::vector<int>, int>, 3> uses;
    for (const auto& t : kept) {
      ++uses[0][t.I];
      ++uses[1][t.J];
      ++uses[2][t.K];
    }
    int ax = -1;
    const std::vector<int>* blk = nullptr;
    for (int a = 0; a < axes && !blk; ++a)
      for (const auto& [b, c] : uses[static_cast<size_t>(a)])
        if (c >= 2) {
          ax = a;
          blk = &b;
          break;
        }
    if (!blk) break;
    const std::vector<int> victim = *blk;
    (ax == 0 ? r.zeroed_x : ax == 1 ? r.zeroed_y : r.zeroed_z).insert(victim);
    const size_t before = kept.size();
    kept.erase(std::remove_if(kept.begin(), kept.end(),
                              [&](const BlockTriple& t) {
                                return (ax == 0 ? t.I : ax == 1 ? t.J : t.K) == victim;
                              }),
               kept.end());
    r.pruned_shared += static_cast<long>(before - kept.size());
  }
  for (const auto& t : kept) {
    if (consistent(t)) {
      r.retained.push_back(t);
    } else {
      r.zeroed_x.insert(t.I);
      ++r.pruned_predicate;
    }
  }

  // Post-state.
  std::array<std::set<std::vector<int>>, 3> seen;
  for (const auto& t : r.retained) {
    if (!seen[0].insert(t.I).second) r.failures.push_back("retained triples share an X-block");
    if (!seen[1].insert(t.J).second) r.failures.push_back("retained triples share a Y-block");
    if (!seen[2].insert(t.K).second && mode == HashingMode::Symmetric)
      r.failures.push_back("retained triples share a Z-block under symmetric hashing");
    if (!consistent(t)) r.failures.push_back("retained triple fails the consistency predicate");
    const auto hx = hash_block(cfg, {t.level, t.I}, Axis::X);
    if (hx != hash_block(cfg, {t.level, t.J}, Axis::Y) || hx != hash_block(cfg, {t.level, t.K}, Axis::Z) ||
        !in_b.count(hx))
      r.failures.push_back("retained triple with unequal hashes");
  }
  r.certified = r.failures.empty();
  return r;
}

// ---- compatibility ----

std::map<int, double> split_of(const std::vector<int>& khat, const std::vector<int>& positions) {
  std::map<int, double> out;
  if (positions.empty()) return out;
  for (int t : positions) out[khat[2 * static_cast<size_t>(t)]] += 1.0;
  for (auto& [kl, v] : out) v /= static_cast<double>(positions.size());
  return out;
}

namespace {

bool split_equals(const std::map<int, double>& got, const SplitDistribution& want, size_t count) {
  std::set<int> keys;
  for (const auto& [kl, v] : got) keys.insert(kl);
  for (const auto& [kl, v] : want.mass) keys.insert(kl);
  for (int kl : keys) {
    auto it = got.find(kl);
    const double g = it == got.end() ? 0.0 : it->second;
    if (std::abs(g - want(kl)) * static_cast<double>(count) > 1e-9) return false;
  }
  return true;
}

void check_child(const std::vector<int>& khat, const BlockTriple& t) {
  const int half = level_total(t.level - 1);
  if (khat.size() != 2 * t.K.size()) throw Error(ErrorKind::NotAChild, "small block has the wrong length");
  for (size_t p = 0; p < t.K.size(); ++p) {
    const int a = khat[2 * p], b = khat[2 * p + 1];
    if (a < 0 || b < 0 || a > half || b > half || a + b != t.K[p])
      throw Error(ErrorKind::NotAChild, "small block does not refine K at position " + std::to_string(p));
  }
}

std::map<Component, std::vector<int>> positions_by_component(const BlockTriple& t) {
  std::map<Component, std::vector<int>> s;
  for (size_t p = 0; p < t.K.size(); ++p)
    s[Component{t.I[p], t.J[p], t.K[p], t.level}].push_back(static_cast<int>(p));
  return s;
}

const SplitDistribution& split_for(const SplitMap& splits, const Component& c) {
  auto it = splits.find(c);
  if (it == splits.end()) throw Error(ErrorKind::ValidationError, "no split for " + to_string(c));
  return it->second;
}

}  // namespace

bool compatibility(const std::vector<int>& khat, const BlockTriple& t, const SplitMap& splits,
                   const JointDistribution& alpha, CompatForm form) {
  check_child(khat, t);
  const auto S = positions_by_component(t);
  if (form == CompatForm::Level2) {
    if (t.level != 2) throw Error(ErrorKind::WrongLevel, "level-2 compatibility on a level-" + std::to_string(t.level) + " triple");
    for (const Component c : {Component{1, 1, 2, 2}, Component{0, 2, 2, 2}, Component{2, 0, 2, 2}}) {
      auto it = S.find(c);
      if (it == S.end()) continue;
      if (!split_equals(split_of(khat, it->second), split_for(splits, c), it->second.size())) return false;
    }
    return true;
  }
  std::map<int, std::vector<int>> by_k;
  for (size_t p = 0; p < t.K.size(); ++p) by_k[t.K[p]].push_back(static_cast<int>(p));
  for (const auto& [k, pos] : by_k) {
    const SplitDistribution avg = average_split(alpha, splits, k);
    if (!split_equals(split_of(khat, pos), avg, pos.size())) return false;
  }
  for (const auto& [c, pos] : S) {
    if (c.i != 0 && c.j != 0) continue;
    if (!split_equals(split_of(khat, pos), split_for(splits, c), pos.size())) return false;
  }
  return true;
}

namespace {

// kl counts of a split over `count` positions; NonIntegerCounts unless integral.
std::map<int, int> split_counts(const SplitDistribution& s, int count) {
  std::map<int, int> out;
  int total = 0;
  for (const auto& [kl, p] : s.mass) {
    const double x = p * count;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9)
      throw Error(ErrorKind::NonIntegerCounts, "split count " + std::to_string(x) + " for k_l = " + std::to_string(kl));
    if (r > 0) out[kl] = static_cast<int>(r);
    total += static_cast<int>(r);
  }
  if (total != count) throw Error(ErrorKind::NonIntegerCounts, "split counts do not sum to the positions");
  return out;
}

// A child pair for index k at a level whose halves are at most `half`.
std::pair<int, int> some_child(int k, int half) {
  const int a = std::min(k, half);
  return {a, k - a};
}

}  // namespace

PcompEstimate empirical_pcomp(const ComponentCounts& counts, const SplitMap& splits, long samples,
                              std::uint64_t seed) {
  if (samples <= 0) throw Error(ErrorKind::ValidationError, "samples must be positive");
  PcompEstimate e;
  e.samples = samples;
  e.seed = seed;
  const JointDistribution alpha = alpha_from_counts(counts);
  if (alpha.level != 2) throw Error(ErrorKind::WrongLevel, "empirical_pcomp is level-2");
  const int n = count_total(counts);
  e.exact = pcomp_exact_level2(alpha, splits, n);

  // Canonical triple: components laid out in map order.
  BlockTriple t{2, {}, {}, {}};
  std::vector<Component> comp_at;
  for (const auto& [c, k] : counts)
    for (int r = 0; r < k; ++r) {
      t.I.push_back(c.i);
      t.J.push_back(c.j);
      t.K.push_back(c.k);
      comp_at.push_back(c);
    }
  // The fixed small block takes each component's own split, so it is
  // compatible with the canonical triple (and hence typical).
  std::vector<int> khat(2 * static_cast<size_t>(n));
  size_t p = 0;
  for (const auto& [c, k] : counts) {
    std::vector<int> kls;
    if (c.k == 2 && splits.count(c)) {
      for (const auto& [kl, m] : split_counts(splits.at(c), k)) kls.insert(kls.end(), static_cast<size_t>(m), kl);
    } else {
      kls.assign(static_cast<size_t>(k), some_child(c.k, 2).first);
    }
    for (int kl : kls) {
      khat[2 * p] = kl;
      khat[2 * p + 1] = c.k - kl;
      ++p;
    }
  }
  std::vector<int> s2;
  for (size_t q = 0; q < t.K.size(); ++q)
    if (t.K[q] == 2) s2.push_back(static_cast<int>(q));

  SimRng rng(seed, {0x70636f6d70});
  long hits = 0;
  BlockTriple r = t;
  for (long s = 0; s < samples; ++s) {
    // Uniform triple obeying the counts through Z_K: permute the components
    // sitting on K = 2 (other positions never enter the level-2 condition).
    std::vector<Component> perm;
    for (int q : s2) perm.push_back(comp_at[static_cast<size_t>(q)]);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    for (size_t a = 0; a < s2.size(); ++a) {
      const size_t q = static_cast<size_t>(s2[a]);
      r.I[q] = perm[a].i;
      r.J[q] = perm[a].j;
    }
    if (compatibility(khat, r, splits, alpha, CompatForm::Level2)) ++hits;
  }
  e.estimate = static_cast<double>(hits) / static_cast<double>(samples);
  e.sigma = std::sqrt(std::max(e.exact * (1.0 - e.exact), 1e-300) / static_cast<double>(samples));
  return e;
}

// ---- standard form tensors ----

int StandardForm::N() const {
  int n = 0;
  for (const auto& f : factors) n += f.n;
  return n;
}

void StandardForm::validate() const {
  if (q < 1) throw Error(ErrorKind::ValidationError, "q must be positive");
  if (level < 2) throw Error(ErrorKind::WrongLevel, "standard form needs level >= 2");
  if (factors.empty()) throw Error(ErrorKind::ParameterMismatch, "standard form without factors");
  std::set<Component> seen;
  for (const auto& f : factors) {
    if (f.component.level != level || !f.component.valid())
      throw Error(ErrorKind::ParameterMismatch, "factor " + to_string(f.component) + " is not a level-" + std::to_string(level) + " component");
    if (!seen.insert(f.component).second)
      throw Error(ErrorKind::ParameterMismatch, "repeated factor " + to_string(f.component));
    if (f.n < 1) throw Error(ErrorKind::ParameterMismatch, "factor multiplicity must be positive");
    if (f.split.k != f.component.k || f.split.level != level)
      throw Error(ErrorKind::ParameterMismatch, "split of " + to_string(f.component) + " has the wrong index");
    f.split.validate(1e-9);
    split_counts(f.split, f.n);
  }
}

namespace {

// Unit offsets of each factor.
std::vector<int> unit_offsets(const StandardForm& f) {
  std::vector<int> off;
  int o = 0;
  for (const auto& fac : f.factors) {
    off.push_back(o);
    o += fac.n;
  }
  return off;
}

int digits_per_unit(const StandardForm& f) { return 1 << (f.level - 1); }

}  // namespace

bool is_available(const StandardForm& f, const std::vector<int>& khat) {
  if (khat.size() != 2 * static_cast<size_t>(f.N())) return false;
  const int half = level_total(f.level - 1);
  const auto off = unit_offsets(f);
  for (size_t t = 0; t < f.factors.size(); ++t) {
    const auto& fac = f.factors[t];
    std::map<int, int> got;
    for (int a = 0; a < fac.n; ++a) {
      const size_t u = static_cast<size_t>(off[t] + a);
      const int l = khat[2 * u], r = khat[2 * u + 1];
      if (l < 0 || r < 0 || l > half || r > half || l + r != fac.component.k) return false;
      ++got[l];
    }
    if (got != split_counts(fac.split, fac.n)) return false;
  }
  return true;
}

std::vector<std::vector<int>> available_z_blocks(const StandardForm& f) {
  f.validate();
  std::vector<std::vector<std::vector<int>>> per;  // per factor: arrangements of k_l
  for (const auto& fac : f.factors) {
    std::vector<int> kls;
    for (const auto& [kl, m] : split_counts(fac.split, fac.n)) kls.insert(kls.end(), static_cast<size_t>(m), kl);
    per.push_back(distinct_permutations(kls));
  }
  std::vector<std::vector<int>> out;
  std::vector<size_t> pick(per.size(), 0);
  while (true) {
    std::vector<int> b;
    for (size_t t = 0; t < per.size(); ++t)
      for (int kl : per[t][pick[t]]) {
        b.push_back(kl);
        b.push_back(f.factors[t].component.k - kl);
      }
    out.push_back(std::move(b));
    size_t t = 0;
    while (t < per.size() && ++pick[t] == per[t].size()) pick[t++] = 0;
    if (t == per.size()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> small_z_block(const StandardForm& f, std::uint64_t zvar) {
  return block_index(f.q, f.N() * digits_per_unit(f), f.level - 1, zvar);
}

SparseTensor build_standard_form(const StandardForm& f, std::size_t cap) {
  f.validate();
  std::vector<Component> units;
  for (const auto& fac : f.factors) units.insert(units.end(), static_cast<size_t>(fac.n), fac.component);
  std::map<Component, SparseTensor> comp;
  for (const auto& c : units)
    if (!comp.count(c)) comp[c] = cw_component(f.q, c);
  // Unit 0 occupies the lowest digits.
  SparseTensor acc = comp.at(units.back());
  for (size_t u = units.size() - 1; u-- > 0;) acc = tensor_product(acc, comp.at(units[u]), cap);
  std::map<std::uint64_t, bool> avail;
  return zero_out(
      acc, [](std::uint64_t) { return true; }, [](std::uint64_t) { return true; },
      [&](std::uint64_t z) {
        auto it = avail.find(z);
        if (it != avail.end()) return it->second;
        return avail[z] = is_available(f, small_z_block(f, z));
      });
}

BrokenCopy break_copy(const StandardForm& f, const SparseTensor& tstar,
                      const std::set<std::vector<int>>& holes) {
  BrokenCopy b;
  b.available = static_cast<long>(available_z_blocks(f).size());
  for (const auto& h : holes)
    if (!is_available(f, h)) throw Error(ErrorKind::ParameterMismatch, "hole is not an available Z-block");
  b.holes = holes;
  b.eta = 1.0 - static_cast<double>(holes.size()) / static_cast<double>(b.available);
  b.tensor = zero_out(
      tstar, [](std::uint64_t) { return true; }, [](std::uint64_t) { return true; },
      [&](std::uint64_t z) { return !holes.count(small_z_block(f, z)); });
  return b;
}

Shuffle random_shuffle(const StandardForm& f, SimRng& rng) {
  Shuffle g;
  for (const auto& fac : f.factors) g.push_back(rng.permutation(fac.n));
  return g;
}

std::vector<int> shuffle_block(const StandardForm& f, const Shuffle& g, const std::vector<int>& block) {
  if (block.size() != 2 * static_cast<size_t>(f.N())) throw Error(ErrorKind::ParameterMismatch, "block length");
  const auto off = unit_offsets(f);
  std::vector<int> out(block.size());
  for (size_t t = 0; t < f.factors.size(); ++t)
    for (int a = 0; a < f.factors[t].n; ++a) {
      const size_t from = static_cast<size_t>(off[t] + a);
      const size_t to = static_cast<size_t>(off[t] + g[t][static_cast<size_t>(a)]);
      out[2 * to] = block[2 * from];
      out[2 * to + 1] = block[2 * from + 1];
    }
  return out;
}

SparseTensor shuffle_tensor(const StandardForm& f, const Shuffle& g, const SparseTensor& t) {
  const auto off = unit_offsets(f);
  const int P = digits_per_unit(f);
  const std::uint64_t B = static_cast<std::uint64_t>(f.q) + 2;
  const std::uint64_t group = ipow(B, P);
  const int units = f.N();
  std::vector<int> dest(static_cast<size_t>(units));
  for (size_t s = 0; s < f.factors.size(); ++s)
    for (int a = 0; a < f.factors[s].n; ++a)
      dest[static_cast<size_t>(off[s] + a)] = off[s] + g[s][static_cast<size_t>(a)];
  std::vector<std::uint64_t> scale(static_cast<size_t>(units));
  std::uint64_t w = 1;
  for (int u = 0; u < units; ++u) {
    scale[static_cast<size_t>(u)] = w;
    w *= group;
  }
  auto map = [&](std::uint64_t v) {
    std::uint64_t out = 0;
    for (int u = 0; u < units; ++u) {
      out += (v % group) * scale[static_cast<size_t>(dest[static_cast<size_t>(u)])];
      v /= group;
    }
    return out;
  };
  return rename(t, map, map, map);
}

StandardHoleFix fix_standard_holes(const StandardForm& f, const std::vector<BrokenCopy>& copies,
                                   std::uint64_t seed) {
  f.validate();
  const SparseTensor tstar = build_standard_form(f);
  const auto avail = available_z_blocks(f);
  for (const auto& c : copies)
    if (!c.tensor.same_universe(tstar) || c.available != static_cast<long>(avail.size()))
      throw Error(ErrorKind::ParameterMismatch, "broken copy is not a copy of this standard form");
  const double need = static_cast<double>(f.N() * f.level) + 1.0;
  double total = 0.0;
  for (const auto& c : copies) total += c.eta;
  StandardHoleFix out;
  out.seed = seed;
  const int s_prime = static_cast<int>(std::floor(total / (need + 1.0) + 1e-12));
  if (s_prime < 1)
    throw Error(ErrorKind::PreconditionUnmet, "sum of non-hole fractions " + std::to_string(total) +
                                                  " is below N l + 2 = " + std::to_string(need + 1.0));
  // Greedy grouping: each closed group has need <= sum < need + 1.
  std::vector<std::vector<size_t>> groups;
  std::vector<size_t> cur;
  double acc = 0.0;
  for (size_t i = 0; i < copies.size() && static_cast<int>(groups.size()) < s_prime; ++i) {
    cur.push_back(i);
    acc += copies[i].eta;
    if (acc >= need - 1e-12) {
      groups.push_back(cur);
      cur.clear();
      acc = 0.0;
    }
  }
  out.groups = static_cast<int>(groups.size());
  SimRng root(seed, {0x73746466});
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& grp = groups[gi];
    SimRng rng = root.split(gi);
    std::vector<Shuffle> shuf;
    std::map<std::vector<int>, size_t> owner;
    bool good = false;
    for (int attempt = 0; attempt < 1000 && !good; ++attempt) {
      ++out.tries;
      shuf.clear();
      std::vector<std::set<std::vector<int>>> moved;
      for (size_t c : grp) {
        shuf.push_back(random_shuffle(f, rng));
        std::set<std::vector<int>> h;
        for (const auto& blk : copies[c].holes) {
          auto img = shuffle_block(f, shuf.back(), blk);
          if (!is_available(f, img))
            throw Error(ErrorKind::SolverFailure, "shuffle moved an available block off the available set");
          h.insert(std::move(img));
        }
        moved.push_back(std::move(h));
      }
      owner.clear();
      good = true;
      for (const auto& blk : avail) {
        size_t t = 0;
        while (t < grp.size() && moved[t].count(blk)) ++t;
        if (t == grp.size()) {
          good = false;
          break;
        }
        owner[blk] = t;
      }
    }
    if (!good) throw Error(ErrorKind::SolverFailure, "no covering shuffle found in 1000 draws");
    std::vector<SparseTensor> parts;
    for (size_t t = 0; t < grp.size(); ++t) {
      const SparseTensor moved = shuffle_tensor(f, shuf[t], copies[grp[t]].tensor);
      parts.push_back(zero_out(
          moved, [](std::uint64_t) { return true; }, [](std::uint64_t) { return true; },
          [&](std::uint64_t z) {
            auto it = owner.find(small_z_block(f, z));
            return it != owner.end() && it->second == t;
          }));
    }
    SparseTensor fixed = identify(parts);
    if (!(fixed == tstar)) throw Error(ErrorKind::SolverFailure, "hole fixing did not reproduce T*");
    out.outputs.push_back(std::move(fixed));
  }
  return out;
}

// ---- matrix holes ----

double BrokenMatmul::eta() const {
  return 1.0 - static_cast<double>(holes.size()) / static_cast<double>(N * P);
}

SparseTensor BrokenMatmul::tensor() const {
  const SparseTensor full = matmul_tensor(N, M, P);
  const long n = N;
  return zero_out(
      full, [](std::uint64_t) { return true; }, [](std::uint64_t) { return true; },
      [&](std::uint64_t z) {
        const long k = static_cast<long>(z) / n, i = static_cast<long>(z) % n;
        return !holes.count({k, i});
      });
}

MatrixHoleFix fix_matrix_holes(const std::vector<BrokenMatmul>& copies, std::uint64_t seed) {
  if (copies.empty()) throw Error(ErrorKind::PreconditionUnmet, "no broken copies");
  const long N = copies[0].N, M = copies[0].M, P = copies[0].P;
  for (const auto& c : copies) {
    if (c.N != N || c.M != M || c.P != P) throw Error(ErrorKind::ParameterMismatch, "copies differ in shape");
    for (const auto& [k, i] : c.holes)
      if (k < 0 || k >= P || i < 0 || i >= N) throw Error(ErrorKind::ParameterMismatch, "hole outside the Z matrix");
  }
  MatrixHoleFix out;
  out.seed = seed;
  for (const auto& c : copies)
    if (c.holes.empty()) {
      out.result = c.tensor();
      return out;
    }
  double total = 0.0;
  for (const auto& c : copies) total += c.eta();
  const double need = std::log2(static_cast<double>(N * P)) + 1.0;
  if (total < need - 1e-12)
    throw Error(ErrorKind::PreconditionUnmet,
                "sum of non-hole fractions " + std::to_string(total) + " < log2(N P) + 1 = " + std::to_string(need));
  SimRng rng(seed, {0x6d6174});
  const size_t s = copies.size();
  std::vector<std::array<std::vector<int>, 3>> sig(s);
  std::vector<long> owner(static_cast<size_t>(N * P));
  bool good = false;
  while (!good) {
    if (++out.tries > 1000) throw Error(ErrorKind::SolverFailure, "no covering permutation found in 1000 draws");
    std::vector<std::set<std::pair<long, long>>> moved(s);
    for (size_t t = 0; t < s; ++t) {
      sig[t] = {rng.permutation(static_cast<int>(N)), rng.permutation(static_cast<int>(M)),
                rng.permutation(static_cast<int>(P))};
      for (const auto& [k, i] : copies[t].holes)
        moved[t].insert({sig[t][2][static_cast<size_t>(k)], sig[t][0][static_cast<size_t>(i)]});
    }
    good = true;
    for (long k = 0; k < P && good; ++k)
      for (long i = 0; i < N && good; ++i) {
        size_t t = 0;
        while (t < s && moved[t].count({k, i})) ++t;
        if (t == s) good = false;
        else owner[static_cast<size_t>(k * N + i)] = static_cast<long>(t);
      }
  }
  std::vector<SparseTensor> parts;
  for (size_t t = 0; t < s; ++t) {
    const auto& g = sig[t];
    auto fx = [&](std::uint64_t v) {
      const long i = static_cast<long>(v) / M, j = static_cast<long>(v) % M;
      return static_cast<std::uint64_t>(g[0][static_cast<size_t>(i)] * M + g[1][static_cast<size_t>(j)]);
    };
    auto fy = [&](std::uint64_t v) {
      const long j = static_cast<long>(v) / P, k = static_cast<long>(v) % P;
      return static_cast<std::uint64_t>(g[1][static_cast<size_t>(j)] * P + g[2][static_cast<size_t>(k)]);
    };
    auto fz = [&](std::uint64_t v) {
      const long k = static_cast<long>(v) / N, i = static_cast<long>(v) % N;
      return static_cast<std::uint64_t>(g[2][static_cast<size_t>(k)] * N + g[0][static_cast<size_t>(i)]);
    };
    const SparseTensor moved = rename(copies[t].tensor(), fx, fy, fz);
    parts.push_back(zero_out(
        moved, [](std::uint64_t) { return true; }, [](std::uint64_t) { return true; },
        [&](std::uint64_t z) { return owner[static_cast<size_t>(z)] == static_cast<long>(t); }));
  }
  out.result = identify(parts);
  if (!(out.result == matmul_tensor(N, M, P)))
    throw Error(ErrorKind::SolverFailure, "matrix hole fixing did not reproduce <N, M, P>");
  return out;
}

// ---- level-2 pipeline ----

int Level2SimParams::n() const { return count_total(counts); }

namespace {

struct Level1Split {
  Component left, right;  // level 1
};

// Level-1 component pairs refining a level-2 component.
const std::vector<Level1Split>& refinements(const Component& c) {
  static std::map<Component, std::vector<Level1Split>> cache;
  auto it = cache.find(c);
  if (it != cache.end()) return it->second;
  std::vector<Level1Split> out;
  for (const auto& l : all_components(1)) {
    const int ri = c.i - l.i, rj = c.j - l.j, rk = c.k - l.k;
    if (ri < 0 || rj < 0 || rk < 0 || ri > 2 || rj > 2 || rk > 2) continue;
    out.push_back({l, Component{ri, rj, rk, 1}});
  }
  return cache[c] = out;
}

long level1_terms(const Component& c, int q) { return c.zero_count() == 2 ? 1 : q; }

struct CopyPredicates {
  const Level2SimParams* p;
  SplitDistribution avg;  // over S_2, from the counts
  SplitDistribution b_rev;

  // Step 1, X side: split of I-hat on S_{2,0,2} must be B reversed.
  bool x_zeroed(const BlockTriple& t, const std::vector<int>& ihat) const {
    std::vector<int> s;
    for (size_t q = 0; q < t.I.size(); ++q)
      if (t.I[q] == 2 && t.J[q] == 0 && t.K[q] == 2) s.push_back(static_cast<int>(q));
    return !s.empty() && !split_equals(split_of(ihat, s), b_rev, s.size());
  }
  bool y_zeroed(const BlockTriple& t, const std::vector<int>& jhat) const {
    std::vector<int> s;
    for (size_t q = 0; q < t.I.size(); ++q)
      if (t.I[q] == 0 && t.J[q] == 2 && t.K[q] == 2) s.push_back(static_cast<int>(q));
    return !s.empty() && !split_equals(split_of(jhat, s), b_rev, s.size());
  }
  bool z_zeroed(const std::vector<int>& K, const std::vector<int>& khat) const {
    std::vector<int> s;
    for (size_t q = 0; q < K.size(); ++q)
      if (K[q] == 2) s.push_back(static_cast<int>(q));
    return !s.empty() && !split_equals(split_of(khat, s), avg, s.size());
  }
};

std::vector<std::vector<int>> children(const std::vector<int>& K) {
  std::vector<std::vector<int>> out{{}};
  for (int k : K) {
    std::vector<std::vector<int>> next;
    for (const auto& base : out)
      for (int a = std::max(0, k - 2); a <= std::min(k, 2); ++a) {
        auto v = base;
        v.push_back(a);
        v.push_back(k - a);
        next.push_back(std::move(v));
      }
    out = std::move(next);
  }
  return out;
}

// Level-1 sequence (length 2n) of a variable of CW_q^{(x)2n}.
std::vector<int> small_seq(int q, int n, std::uint64_t v) { return level1_indices(q, 2 * n, v); }

}  // namespace

Level2SimResult level2_pipeline(const Level2SimParams& p, std::uint64_t seed) {
  const int n = p.n();
  if (p.q < 1 || p.q > 3) throw Error(ErrorKind::OutOfRange, "level2_pipeline needs 1 <= q <= 3");
  if (n < 1 || n > 6) throw Error(ErrorKind::OutOfRange, "level2_pipeline needs 1 <= n <= 6");
  for (const auto& [c, k] : p.counts)
    if (c.level != 2 || !c.valid()) throw Error(ErrorKind::WrongLevel, "counts must be over level-2 components");
  if (p.A.k != 2 || p.A.level != 2 || p.B.k != 2 || p.B.level != 2)
    throw Error(ErrorKind::ValidationError, "A and B must split the level-2 index 2");
  p.A.validate(1e-9);
  p.B.validate(1e-9);

  Level2SimResult res;
  res.seed = seed;
  const JointDistribution alpha = alpha_from_counts(p.counts);
  SplitMap splits;
  splits[Component{1, 1, 2, 2}] = p.A;
  splits[Component{0, 2, 2, 2}] = p.B;
  splits[Component{2, 0, 2, 2}] = p.B;
  // Integrality of the per-component split counts.
  for (const auto& [c, k] : p.counts)
    if (splits.count(c)) split_counts(splits.at(c), k);

  CopyPredicates pred{&p, {}, {}};
  {
    std::map<int, double> avg;
    int s2 = 0;
    for (const auto& [c, k] : p.counts) {
      if (c.k != 2 || k == 0) continue;
      s2 += k;
      const SplitDistribution sd = splits.count(c) ? splits.at(c) : SplitDistribution::uniform(2, 2);
      if (!splits.count(c))
        throw Error(ErrorKind::ValidationError, "level-2 pipeline supports k = 2 only on (1,1,2), (0,2,2), (2,0,2)");
      for (const auto& [kl, m] : sd.mass) avg[kl] += m * k;
    }
    pred.avg = SplitDistribution{2, 2, {}};
    for (auto& [kl, v] : avg) pred.avg.mass[kl] = s2 > 0 ? v / s2 : 0.0;
    pred.b_rev = SplitDistribution{2, 2, {}};
    for (const auto& [kl, m] : p.B.mass) pred.b_rev.mass[2 - kl] = m;
  }

  const TripleUniverse U = enumerate_triples(2, p.counts);
  res.n_x = static_cast<long>(U.xblocks.size());
  res.n_z = static_cast<long>(U.zblocks.size());
  res.n_triple = static_cast<long>(U.triples.size());
  res.n_alpha = U.n_alpha;
  res.p_comp = pcomp_exact_level2(alpha, splits, n);
  const std::uint64_t min_m = static_cast<std::uint64_t>(std::ceil(4.0 * res.n_triple / res.n_x));
  res.M = p.modulus ? p.modulus : next_prime(std::max<std::uint64_t>(3, min_m));
  res.sizing_ok = res.M >= min_m && res.n_x * res.p_comp <= res.n_z * (1.0 + 1e-12);

  const HashConfig cfg = random_hash_config(res.M, n, seed);
  const HashingResult H = hashing_round(U.triples, cfg, HashingMode::Asymmetric,
                                        [&](const BlockTriple& t) { return obeys(t, p.counts); });
  auto& cert = res.cert;
  cert.hashing = H.certified;
  for (const auto& f : H.failures) cert.failures.push_back("hashing: " + f);
  const auto& kept = H.retained;

  // Compatible (T*-available) small Z-blocks of each retained triple.
  std::vector<std::set<std::vector<int>>> compat(kept.size());
  for (size_t a = 0; a < kept.size(); ++a)
    for (const auto& kh : children(kept[a].K))
      if (compatibility(kh, kept[a], splits, alpha, CompatForm::Level2)) compat[a].insert(kh);

  // Step 2: small Z-blocks compatible with two retained triples through one Z_K.
  std::set<std::vector<int>> step2;
  for (size_t a = 0; a < kept.size(); ++a)
    for (size_t b = a + 1; b < kept.size(); ++b) {
      if (kept[a].K != kept[b].K) continue;
      for (const auto& kh : compat[a])
        if (compat[b].count(kh)) step2.insert(kh);
    }

  cert.zeroing = cert.tstar = cert.terms_match = cert.independent = true;
  std::vector<std::set<std::vector<int>>> live_z(kept.size());
  for (size_t a = 0; a < kept.size(); ++a) {
    const BlockTriple& t = kept[a];
    Level2Copy copy;
    copy.triple = t;
    copy.available = static_cast<long>(compat[a].size());
    for (const auto& kh : compat[a])
      if (step2.count(kh)) ++copy.holes;
    copy.eta = copy.available ? 1.0 - static_cast<double>(copy.holes) / static_cast<double>(copy.available) : 0.0;

    // Exhaustive scan of the small block triples inside (X_I, Y_J, Z_K).
    std::vector<const std::vector<Level1Split>*> opts;
    for (size_t q = 0; q < t.K.size(); ++q) opts.push_back(&refinements(Component{t.I[q], t.J[q], t.K[q], 2}));
    std::vector<size_t> pick(opts.size(), 0);
    std::vector<int> ih(2 * opts.size()), jh(ih.size()), kh(ih.size());
    while (true) {
      long terms = 1;
      for (size_t q = 0; q < opts.size(); ++q) {
        const auto& s = (*opts[q])[pick[q]];
        ih[2 * q] = s.left.i;
        ih[2 * q + 1] = s.right.i;
        jh[2 * q] = s.left.j;
        jh[2 * q + 1] = s.right.j;
        kh[2 * q] = s.left.k;
        kh[2 * q + 1] = s.right.k;
        terms *= level1_terms(s.left, p.q) * level1_terms(s.right, p.q);
      }
      ++cert.block_triples_scanned;
      const bool is_compat = compat[a].count(kh) > 0;
      const bool survive1 = !pred.x_zeroed(t, ih) && !pred.y_zeroed(t, jh) && !pred.z_zeroed(t.K, kh);
      if (!is_compat && survive1) {
        cert.zeroing = false;
        cert.failures.push_back("incompatible small Z-block keeps terms with its triple");
      }
      if (survive1 != is_compat) {
        cert.tstar = false;
        cert.failures.push_back("surviving small triples differ from those of T*");
      }
      if (survive1 && !step2.count(kh)) live_z[a].insert(kh);
      size_t q = 0;
      while (q < opts.size() && ++pick[q] == opts[q]->size()) pick[q++] = 0;
      if (q == opts.size()) break;
    }

    // Term level: the copy after step 1 against T* built by restriction.
    double est = 1.0;
    for (size_t q = 0; q < t.K.size(); ++q) {
      long c = 0;
      for (const auto& s : refinements(Component{t.I[q], t.J[q], t.K[q], 2}))
        c += level1_terms(s.left, p.q) * level1_terms(s.right, p.q);
      est *= static_cast<double>(c);
    }
    if (est <= static_cast<double>(p.term_check_cap)) {
      SparseTensor prod = cw_component(p.q, Component{t.I.back(), t.J.back(), t.K.back(), 2});
      for (size_t q = t.K.size() - 1; q-- > 0;)
        prod = tensor_product(prod, cw_component(p.q, Component{t.I[q], t.J[q], t.K[q], 2}));
      const SparseTensor after1 = zero_out(
          prod, [&](std::uint64_t v) { return !pred.x_zeroed(t, small_seq(p.q, n, v)); },
          [&](std::uint64_t v) { return !pred.y_zeroed(t, small_seq(p.q, n, v)); },
          [&](std::uint64_t v) { return !pred.z_zeroed(t.K, small_seq(p.q, n, v)); });
      const SparseTensor tstar = zero_out(
          prod, [](std::uint64_t) { return true; }, [](std::uint64_t) { return true; },
          [&](std::uint64_t v) {
            return compatibility(small_seq(p.q, n, v), t, splits, alpha, CompatForm::Level2);
          });
      cert.terms_compared += static_cast<long>(prod.size());
      if (!(after1 == tstar)) {
        cert.terms_match = false;
        cert.failures.push_back("term-level copy differs from T*");
      }
      copy.matmul = is_matmul(after1).has_value();
    }
    res.copies.push_back(copy);
  }

  // Independence: no cross triples among retained blocks, and no small
  // Z-block with surviving terms in two copies.
  std::set<std::vector<int>> ks;
  for (const auto& t : kept) ks.insert(t.K);
  for (size_t a = 0; a < kept.size(); ++a)
    for (size_t b = 0; b < kept.size(); ++b) {
      if (a == b) continue;
      std::vector<int> K(kept[a].I.size());
      bool ok = true;
      for (size_t q = 0; q < K.size() && ok; ++q) {
        K[q] = 4 - kept[a].I[q] - kept[b].J[q];
        ok = K[q] >= 0;
      }
      if (ok && ks.count(K)) {
        cert.independent = false;
        cert.failures.push_back("cross triple between two retained copies");
      }
      if (b > a && kept[a].K == kept[b].K)
        for (const auto& kh : live_z[a])
          if (live_z[b].count(kh)) {
            cert.independent = false;
            cert.failures.push_back("small Z-block live in two copies");
            break;
          }
    }
  return res;
}

}  // namespace cwl
