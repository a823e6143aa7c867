#include "cwlaser/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "cwlaser/error.hpp"

namespace cwl {

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::HashLoss: return "hash_loss";
    case Branch::Compat: return "compat";
    case Branch::Symmetric: return "symmetric";
  }
  return "?";
}

// ---- GlobalParams ----

void GlobalParams::validate() const {
  if (q < 1) throw Error(ErrorKind::ValidationError, "q must be positive");
  if (!(tau >= 2.0 / 3.0 - 1e-12 && tau <= 1.0 + 1e-12))
    throw Error(ErrorKind::OutOfRange, "tau outside [2/3, 1]");
  if (alpha.level != level) throw Error(ErrorKind::WrongLevel, "alpha level mismatch");
  alpha.validate();
  for (const auto& [c, p] : alpha.mass) {
    if (p <= 0.0) continue;
    auto s = splits.find(c);
    if (s == splits.end()) throw Error(ErrorKind::ValidationError, "no split for " + to_string(c));
    if (s->second.k != c.k || s->second.level != c.level)
      throw Error(ErrorKind::ValidationError, "split for " + to_string(c) + " has wrong index");
    s->second.validate(1e-9);
    auto v = values.find(c);
    if (v == values.end()) throw Error(ErrorKind::MissingLowerValue, "no value for " + to_string(c));
    v->second.validate();
    if (split_digest(v->second.z_split) != split_digest(s->second))
      throw Error(ErrorKind::ValidationError,
                  "value pair split does not match the assigned split for " + to_string(c));
  }
  if (require_rotation_symmetry) {
    for (const auto& [c, v] : values) {
      if (v.kind == ValueKind::Nonrot || alpha(c) <= 0.0) continue;
      const double a0 = alpha(c), a1 = alpha(rotate(c)), a2 = alpha(rotate(rotate(c)));
      if (std::abs(a0 - a1) > 1e-12 || std::abs(a0 - a2) > 1e-12)
        throw Error(ErrorKind::SymmetryViolated,
                    "alpha is not rotation-symmetric on " + to_string(c) +
                        ", which only has a rotation-symmetric value");
    }
  }
}

// ---- typical distribution and p_hat ----

TypicalDistribution typical_distribution(const JointDistribution& alpha, const SplitMap& splits) {
  TypicalDistribution g{alpha.level, {}};
  double total = 0.0;
  for (const auto& [c, p] : alpha.mass) {
    if (p <= 0.0) continue;
    auto it = splits.find(c);
    if (it == splits.end()) throw Error(ErrorKind::ValidationError, "no split for " + to_string(c));
    for (const auto& [kl, s] : it->second.mass) {
      if (s <= 0.0) continue;
      g.mass[{kl, c.k - kl}] += p * s;
      total += p * s;
    }
  }
  if (total <= 0.0) throw Error(ErrorKind::ZeroMass, "typical distribution has no mass");
  return g;
}

double phat_global(const JointDistribution& alpha, const SplitMap& splits) {
  auto m = marginals(alpha);
  double lp = entropy(m[2]) - entropy(typical_distribution(alpha, splits));
  std::map<int, double> pp_mass;
  for (const auto& [c, p] : alpha.mass) {
    if (p <= 0.0) continue;
    if (c.i == 0 || c.j == 0)
      lp += p * entropy(splits.at(c));
    else
      pp_mass[c.k] += p;
  }
  for (const auto& [k, w] : pp_mass)
    lp += w * entropy(average_split(alpha, splits, k, SplitRestriction::BothPositive));
  // Non-positive up to rounding.
  return std::min(lp, 0.0);
}

namespace {

// Largest-remainder rounding of total * p over the split support.
std::vector<long long> split_counts(long long total, const SplitDistribution& s,
                                    CountRounding rounding, std::vector<int>& keys) {
  keys.clear();
  std::vector<double> exact;
  for (const auto& [kl, p] : s.mass) {
    keys.push_back(kl);
    exact.push_back(static_cast<double>(total) * p);
  }
  std::vector<long long> out(exact.size());
  if (rounding == CountRounding::Strict) {
    for (size_t t = 0; t < exact.size(); ++t) {
      const double r = std::round(exact[t]);
      if (std::abs(exact[t] - r) > 1e-6)
        throw Error(ErrorKind::NonIntegerCounts, "split count " + std::to_string(exact[t]));
      out[t] = static_cast<long long>(r);
    }
    long long s2 = 0;
    for (auto v : out) s2 += v;
    if (s2 != total) throw Error(ErrorKind::NonIntegerCounts, "split counts do not add up");
    return out;
  }
  long long assigned = 0;
  std::vector<std::pair<double, size_t>> rem;
  for (size_t t = 0; t < exact.size(); ++t) {
    out[t] = static_cast<long long>(std::floor(exact[t]));
    assigned += out[t];
    rem.push_back({exact[t] - std::floor(exact[t]), t});
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
  for (size_t t = 0; assigned < total && t < rem.size(); ++t, ++assigned) out[rem[t].second]++;
  return out;
}

}  // namespace

double log2_pcomp_exact_level2(const JointDistribution& alpha, const SplitMap& splits, long n,
                               CountRounding rounding) {
  if (alpha.level != 2) throw Error(ErrorKind::WrongLevel, "pcomp_exact_level2 needs a level-2 alpha");
  if (n <= 0) throw Error(ErrorKind::OutOfRange, "n must be positive");
  // Only Z index 2 is constrained at level 2 (splits 0+2, 1+1, 2+0).
  const int k = 2;
  double lp = 0.0;
  std::map<int, long long> pooled_pp, pooled_all;
  for (const auto& [c, p] : alpha.mass) {
    if (c.k != k || p <= 0.0) continue;
    const double exact = static_cast<double>(n) * p;
    long long cnt = std::llround(exact);
    if (rounding == CountRounding::Strict && std::abs(exact - cnt) > 1e-6)
      throw Error(ErrorKind::NonIntegerCounts, "n * alpha" + to_string(c) + " = " + std::to_string(exact));
    std::vector<int> keys;
    auto counts = split_counts(cnt, splits.at(c), rounding, keys);
    if (c.i == 0 || c.j == 0) lp += log_multinomial(cnt, counts);
    for (size_t t = 0; t < keys.size(); ++t) {
      if (c.i > 0 && c.j > 0) pooled_pp[keys[t]] += counts[t];
      pooled_all[keys[t]] += counts[t];
    }
  }
  auto pooled = [](const std::map<int, long long>& m) {
    std::vector<long long> v;
    long long s = 0;
    for (const auto& [kl, c] : m) {
      v.push_back(c);
      s += c;
    }
    return log_multinomial(s, v);
  };
  lp += pooled(pooled_pp) - pooled(pooled_all);
  return lp;
}

double pcomp_exact_level2(const JointDistribution& alpha, const SplitMap& splits, long n,
                          CountRounding rounding) {
  return std::exp2(log2_pcomp_exact_level2(alpha, splits, n, rounding));
}

// ---- max entropy cache ----

namespace {

struct MaxEntCache {
  std::shared_mutex mu;
  std::unordered_map<std::string, MaxEntropyResult> map;
};

MaxEntCache& cache() {
  static MaxEntCache c;
  return c;
}

std::string marginal_digest(const std::array<MarginalDistribution, 3>& m,
                            const std::set<Component>& support, const IpfOptions& opt) {
  std::string s = "L" + std::to_string(m[0].level);
  char buf[40];
  for (const auto& mm : m) {
    s += "|";
    for (double p : mm.mass) {
      std::snprintf(buf, sizeof buf, "%.17g,", p);
      s += buf;
    }
  }
  s += "|S";
  for (const auto& c : support) s += std::to_string(c.i) + "." + std::to_string(c.j) + ".";
  std::snprintf(buf, sizeof buf, "|%g|%ld", opt.tol, opt.max_sweeps);
  return s + buf;
}

MaxEntropyResult cached_max_entropy(const std::array<MarginalDistribution, 3>& m,
                                    const std::set<Component>& support, const IpfOptions& opt) {
  const std::string key = marginal_digest(m, support, opt);
  auto& c = cache();
  {
    std::shared_lock lock(c.mu);
    auto it = c.map.find(key);
    if (it != c.map.end()) return it->second;
  }
  MaxEntropyResult r = max_entropy_with_marginals(support, m[0], m[1], m[2], opt);
  std::unique_lock lock(c.mu);
  c.map.emplace(key, r);
  return r;
}

}  // namespace

MaxEntropyResult max_entropy_for(const JointDistribution& alpha, const IpfOptions& opt) {
  auto m = marginals(alpha);
  auto all = all_components(alpha.level);
  return cached_max_entropy(m, std::set<Component>(all.begin(), all.end()), opt);
}

void clear_max_entropy_cache() {
  std::unique_lock lock(cache().mu);
  cache().map.clear();
}

// ---- global verification ----

VerifyReport verify_global(const GlobalParams& params) {
  params.validate();
  const JointDistribution alpha = params.alpha.pruned();
  VerifyReport r;
  r.tau = params.tau;
  auto m = marginals(alpha);
  r.log2_ax = entropy(m[0]);
  r.log2_ay = entropy(m[1]);
  r.log2_az = entropy(m[2]);
  // Block counts: asymmetric hashing needs N_x = N_y >= N_z, symmetric needs all equal.
  if (std::abs(r.log2_ax - r.log2_ay) > kMarginalEntropyTol)
    throw Error(ErrorKind::SymmetryViolated,
                "H(alpha_X) != H(alpha_Y) (" + std::to_string(r.log2_ax - r.log2_ay) + " bits)");
  if (params.hashing == HashingMode::Symmetric) {
    if (std::abs(r.log2_ax - r.log2_az) > kMarginalEntropyTol)
      throw Error(ErrorKind::SymmetryViolated,
                  "symmetric hashing needs H(alpha_X) = H(alpha_Z)");
  } else if (r.log2_az > r.log2_ax + kMarginalEntropyTol) {
    throw Error(ErrorKind::SymmetryViolated, "asymmetric hashing needs H(alpha_Z) <= H(alpha_X)");
  }
  r.log2_nhat = entropy(alpha);
  auto me = max_entropy_for(alpha);
  r.ipf_sweeps = me.sweeps;
  // The IPF maximum can undershoot n_hat by rounding; never report a gain.
  r.log2_max = std::max(me.bits, r.log2_nhat);
  r.hash_loss = r.log2_nhat - r.log2_max;
  r.log2_phat = phat_global(alpha, params.splits);
  for (const auto& [c, p] : alpha.mass) r.log2_vhat += p * params.values.at(c).log2_value;
  r.left = r.log2_nhat + r.log2_ax - r.log2_max;
  r.right = r.log2_az - r.log2_phat;
  r.log2_slack = r.log2_az - r.log2_phat - r.log2_ax;
  r.constraint_ok = r.log2_slack >= 0.0;
  if (params.hashing == HashingMode::Symmetric) {
    r.branch = Branch::Symmetric;
    r.log2_bound = (r.log2_ax + r.log2_ay + r.log2_az) / 3.0 + r.hash_loss + r.log2_vhat;
    r.notes.push_back("symmetric hashing: bound uses the average marginal entropy");
  } else {
    r.branch = r.left <= r.right ? Branch::HashLoss : Branch::Compat;
    r.log2_bound = std::min(r.left, r.right) + r.log2_vhat;
  }
  r.notes.push_back("p_hat is the asymptotic compatibility rate (an upper bound on p_comp)");
  return r;
}

// ---- level-2 non-rotational family ----

JointDistribution level2_family_alpha(const Level2Family& f) {
  JointDistribution a{2, {}};
  a.mass[Component{0, 2, 2, 2}] = f.a;
  a.mass[Component{2, 0, 2, 2}] = f.a;
  a.mass[Component{2, 2, 0, 2}] = f.b;
  for (auto c : {Component{1, 1, 2, 2}, Component{1, 2, 1, 2}, Component{2, 1, 1, 2}}) a.mass[c] = f.c;
  for (auto c : {Component{0, 0, 4, 2}, Component{0, 4, 0, 2}, Component{4, 0, 0, 2}}) a.mass[c] = f.d;
  for (auto c : {Component{0, 1, 3, 2}, Component{0, 3, 1, 2}, Component{1, 0, 3, 2},
                 Component{1, 3, 0, 2}, Component{3, 0, 1, 2}, Component{3, 1, 0, 2}})
    a.mass[c] = f.e;
  return a;
}

namespace {

SplitDistribution split_a(int q, double tau) {
  const double b = level2_112_optimal_b(q, tau);
  return SplitDistribution{2, 2, {{0, b}, {1, 1.0 - 2.0 * b}, {2, b}}};
}

SplitDistribution split_b(int q) {
  const double qq = static_cast<double>(q) * q;
  return SplitDistribution{2, 2, {{0, 1.0 / (2.0 + qq)}, {1, qq / (2.0 + qq)}, {2, 1.0 / (2.0 + qq)}}};
}

// Rotation of the (1,1,2) symmetric-hashing pair to (1,2,1) or (2,1,1).
ValuePair rotated_112(int q, double tau, const Component& c) {
  ValuePair v = level2_112_value(q, tau, level2_112_optimal_b(q, tau));
  v.component = c;
  v.z_split = SplitDistribution{2, 1, {{0, 0.5}, {1, 0.5}}};
  return v;
}

}  // namespace

GlobalParams level2_nonrot_params(int q, double tau, const Level2Family& f) {
  GlobalParams p;
  p.q = q;
  p.level = 2;
  p.tau = tau;
  p.alpha = level2_family_alpha(f);
  p.hashing = HashingMode::Asymmetric;
  for (const auto& [c, w] : p.alpha.mass) {
    ValuePair v;
    if (c == Component{1, 1, 2, 2}) {
      v = level2_112_value(q, tau, level2_112_optimal_b(q, tau));
    } else if (!c.has_zero()) {
      v = rotated_112(q, tau, c);
    } else if (c.k == 2) {
      v = restricted_merging_value(c, split_b(q), q, tau);
    } else {
      v = merging_value_pair(c, q, tau);
    }
    p.values[c] = v;
    p.splits[c] = v.z_split;
  }
  return p;
}

VerifyReport evaluate_level2_nonrot(const GlobalParams& params) {
  if (params.level != 2) throw Error(ErrorKind::WrongLevel, "level-2 verification needs level 2");
  const auto& al = params.alpha;
  auto eq = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
  const Component c022{0, 2, 2, 2}, c202{2, 0, 2, 2}, c112{1, 1, 2, 2};
  if (!eq(al(c022), al(c202)))
    throw Error(ErrorKind::ValidationError, "alpha(0,2,2) must equal alpha(2,0,2)");
  if (!eq(al(c112), al(Component{1, 2, 1, 2})) || !eq(al(c112), al(Component{2, 1, 1, 2})))
    throw Error(ErrorKind::SymmetryViolated,
                "T_{1,1,2} has no non-rotational value; its family must be rotation-symmetric");
  if (!eq(al(Component{0, 0, 4, 2}), al(Component{0, 4, 0, 2})) ||
      !eq(al(Component{0, 0, 4, 2}), al(Component{4, 0, 0, 2})))
    throw Error(ErrorKind::ValidationError, "the (0,0,4) family must share one mass");
  const double e = al(Component{0, 1, 3, 2});
  for (auto c : {Component{0, 3, 1, 2}, Component{1, 0, 3, 2}, Component{1, 3, 0, 2},
                 Component{3, 0, 1, 2}, Component{3, 1, 0, 2}})
    if (!eq(al(c), e)) throw Error(ErrorKind::ValidationError, "the (0,1,3) family must share one mass");

  const SplitDistribution A = split_a(params.q, params.tau), B = split_b(params.q);
  auto same = [](const SplitDistribution& x, const SplitDistribution& y) {
    for (int kl = 0; kl <= 2; ++kl)
      if (std::abs(x(kl) - y(kl)) > 1e-9) return false;
    return true;
  };
  if (al(c112) > 0.0 && !same(params.splits.at(c112), A))
    throw Error(ErrorKind::ValidationError, "T_{1,1,2} split must be the A split at tau");
  for (auto c : {c022, c202})
    if (al(c) > 0.0 && !same(params.splits.at(c), B))
      throw Error(ErrorKind::ValidationError, "T_{0,2,2} and T_{2,0,2} splits must be the B split");

  VerifyReport r = verify_global(params);

  // Closed form: only Z index 2 mixes two different splits.
  const double a = al(c022), c = al(c112);
  if (a + c > 0.0) {
    SplitDistribution avg{2, 2, {}};
    for (int kl = 0; kl <= 2; ++kl) avg.mass[kl] = (c * A(kl) + 2.0 * a * B(kl)) / (c + 2.0 * a);
    r.log2_phat_closed = 2.0 * a * entropy(B) + c * entropy(A) - (c + 2.0 * a) * entropy(avg);
  } else {
    r.log2_phat_closed = 0.0;
  }

  // Non-rotational bound: a_x * n_hat / max * V_hat under the hard constraint.
  r.branch = Branch::HashLoss;
  r.log2_bound = r.left + r.log2_vhat;
  r.notes.push_back("level-2 bound requires a_x <= a_z / p_hat");
  return r;
}

VerifyReport verify_level2_nonrot(const GlobalParams& params) {
  VerifyReport r = evaluate_level2_nonrot(params);
  if (!r.constraint_ok) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "a_x exceeds a_z / p_hat; log2 slack %.12g", r.log2_slack);
    throw ConstraintError(buf, r.log2_slack);
  }
  return r;
}

// ---- component verification ----

Component region_component(const Component& c, int r) {
  Component out = c;
  for (int t = 0; t < r; ++t) out = rotate(out);
  return out;
}

void RegionParams::validate() const {
  if (!component.valid()) throw Error(ErrorKind::InvalidComponent, to_string(component));
  if (component.has_zero())
    throw Error(ErrorKind::ZeroComponent,
                to_string(component) + " contains a zero; use restricted merging");
  if (component.level < 2) throw Error(ErrorKind::WrongLevel, "component verification needs level >= 2");
  double s = 0.0;
  for (double a : A) {
    if (!(a >= 0.0)) throw Error(ErrorKind::ValidationError, "negative region weight");
    s += a;
  }
  if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorKind::ValidationError, "A must sum to 1");
  for (int r = 0; r < 3; ++r) {
    if (A[r] <= 0.0) continue;
    const Component P = region_component(component, r);
    if (alpha[r].level != component.level - 1)
      throw Error(ErrorKind::WrongLevel, "region alpha must be over level-" +
                                             std::to_string(component.level - 1) + " parts");
    alpha[r].validate(1e-9);
    for (const auto& [cl, p] : alpha[r].mass) {
      if (p <= 0.0) continue;
      const Component cr = right_part(P, cl);
      for (const Component& x : {cl, cr}) {
        auto it = lower[r].find(x);
        if (it == lower[r].end())
          throw Error(ErrorKind::MissingLowerValue,
                      "region " + std::to_string(r + 1) + " lacks a value for " + to_string(x));
        it->second.validate();
        if (it->second.component != x)
          throw Error(ErrorKind::ValidationError, "lower value keyed under the wrong component");
      }
    }
  }
  // Requested marginals: Z of region 1, Y of region 2, X of region 3 (all
  // three are splits of the original k).
  for (int r = 0; r < 3; ++r) {
    if (!marginal_targets[r] || A[r] <= 0.0) continue;
    const int axis = 2 - r;
    auto m = marginals(alpha[r]);
    for (int v = 0; v < static_cast<int>(m[axis].mass.size()); ++v)
      if (std::abs(m[axis].mass[v] - (*marginal_targets[r])(v)) > 1e-9)
        throw Error(ErrorKind::MarginMismatch,
                    "region " + std::to_string(r + 1) + " marginal differs from its target split");
  }
}

TypicalDistribution typical_distribution_region(const RegionParams& p, int r) {
  const Component P = region_component(p.component, r);
  TypicalDistribution g{p.component.level, {}};
  double total = 0.0;
  for (const auto& [cl, a] : p.alpha[r].mass) {
    if (a <= 0.0) continue;
    const Component cr = right_part(P, cl);
    const auto& sl = p.lower[r].at(cl).z_split;
    const auto& sr = p.lower[r].at(cr).z_split;
    for (const auto& [k1, s1] : sl.mass)
      for (const auto& [k3, s3] : sr.mass) {
        const double w = a * s1 * s3;
        if (w <= 0.0) continue;
        g.mass[{k1, cl.k - k1, k3, cr.k - k3}] += w;
        total += w;
      }
  }
  if (total <= 0.0) throw Error(ErrorKind::ZeroMass, "region typical distribution has no mass");
  return g;
}

namespace {

std::map<Component, double> region_beta(const RegionParams& p, int r) {
  const Component P = region_component(p.component, r);
  std::map<Component, double> beta;
  for (const auto& [cl, a] : p.alpha[r].mass) {
    if (a <= 0.0) continue;
    beta[cl] += a / 2.0;
    beta[right_part(P, cl)] += a / 2.0;
  }
  return beta;
}

}  // namespace

double phat_region(const RegionParams& p, int r) {
  auto m = marginals(p.alpha[r]);
  double lp = entropy(m[2]) - entropy(typical_distribution_region(p, r));
  auto beta = region_beta(p, r);
  std::map<int, double> pp_mass;
  std::map<int, std::map<int, double>> pp_mix;
  for (const auto& [c, b] : beta) {
    const auto& s = p.lower[r].at(c).z_split;
    if (c.i == 0 || c.j == 0) {
      lp += 2.0 * b * entropy(s);
    } else {
      pp_mass[c.k] += b;
      for (const auto& [kl, x] : s.mass) pp_mix[c.k][kl] += b * x;
    }
  }
  for (const auto& [k, w] : pp_mass) {
    std::vector<double> mix;
    for (const auto& [kl, x] : pp_mix[k]) mix.push_back(x / w);
    lp += 2.0 * w * entropy(mix);
  }
  return std::min(lp, 0.0);
}

ComponentReport verify_component_report(const RegionParams& params, double tau) {
  params.validate();
  ComponentReport out;
  VerifyReport& r = out.combined;
  r.tau = tau;
  const Component& c = params.component;
  SplitDistribution z{c.level, c.k, {}};
  for (int t = 0; t < 3; ++t) {
    const double w = params.A[t];
    if (w <= 0.0) continue;
    const Component P = region_component(c, t);
    const JointDistribution al = params.alpha[t].pruned();
    auto m = marginals(al);
    RegionReport& rr = out.regions[t];
    rr.log2_ax = entropy(m[0]);
    rr.log2_ay = entropy(m[1]);
    rr.log2_az = entropy(m[2]);
    rr.log2_nhat = entropy(al);
    // D_alpha ranges over joint splits of P: left part c' with P - c' valid.
    std::set<Component> support;
    for (const auto& cl : all_components(c.level - 1)) {
      Component cr{P.i - cl.i, P.j - cl.j, P.k - cl.k, c.level - 1};
      if (cr.valid()) support.insert(cl);
    }
    auto me = cached_max_entropy(m, support, IpfOptions::from_env());
    rr.log2_max = std::max(me.bits, rr.log2_nhat);
    r.ipf_sweeps += me.sweeps;
    rr.log2_phat = phat_region(params, t);
    for (const auto& [cc, b] : region_beta(params, t))
      rr.log2_vhat += 2.0 * b * params.lower[t].at(cc).log2_value;

    r.log2_ax += w * (rr.log2_ax + rr.log2_ay) / 2.0;
    r.log2_ay += w * (rr.log2_ax + rr.log2_ay) / 2.0;
    r.log2_az += w * rr.log2_az;
    r.log2_nhat += w * rr.log2_nhat;
    r.log2_max += w * rr.log2_max;
    r.log2_phat += w * rr.log2_phat;
    r.log2_vhat += w * rr.log2_vhat;

    // Output split: Z of region 1, Y of region 2, X of region 3.
    const int axis = 2 - t;
    for (int v = 0; v < static_cast<int>(m[axis].mass.size()); ++v)
      if (m[axis].mass[v] > 0.0) z.mass[v] += w * m[axis].mass[v];
  }
  r.hash_loss = r.log2_nhat - r.log2_max;
  r.left = r.log2_nhat + r.log2_ax - r.log2_max;
  r.right = r.log2_az - r.log2_phat;
  r.log2_slack = r.log2_az - r.log2_phat - r.log2_ax;
  r.constraint_ok = r.log2_slack >= 0.0;
  r.branch = r.left <= r.right ? Branch::HashLoss : Branch::Compat;
  r.log2_bound = std::min(r.left, r.right) + r.log2_vhat;
  double zs = 0.0;
  for (auto& [kl, x] : z.mass) zs += x;
  for (auto& [kl, x] : z.mass) x /= zs;
  out.value = ValuePair{c, tau, r.log2_bound, z, ValueKind::Sym6};
  return out;
}

ValuePair verify_component(const RegionParams& params, double tau) {
  return verify_component_report(params, tau).value;
}

}  // namespace cwl
