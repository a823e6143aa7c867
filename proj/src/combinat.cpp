#include "cwlaser/combinat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <tuple>

#include "cwlaser/error.hpp"

namespace cwl {

bool operator<(const Component& a, const Component& b) {
  return std::tie(a.level, a.i, a.j, a.k) < std::tie(b.level, b.i, b.j, b.k);
}

bool operator==(const Component& a, const Component& b) {
  return a.level == b.level && a.i == b.i && a.j == b.j && a.k == b.k;
}

Component make_component(int i, int j, int k, int level) {
  Component c{i, j, k, level};
  if (!c.valid()) {
    throw Error(ErrorKind::InvalidComponent,
                to_string(c) + " does not sum to 2^" + std::to_string(level));
  }
  return c;
}

Component rotate(const Component& c) { return Component{c.j, c.k, c.i, c.level}; }
Component swap_xy(const Component& c) { return Component{c.j, c.i, c.k, c.level}; }

std::string to_string(const Component& c) {
  std::ostringstream os;
  os << "(" << c.i << "," << c.j << "," << c.k << ")@" << c.level;
  return os.str();
}

std::vector<Component> all_components(int level) {
  const int n = level_total(level);
  std::vector<Component> out;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; i + j <= n; ++j) out.push_back(Component{i, j, n - i - j, level});
  return out;
}

// ---- JointDistribution ----

double JointDistribution::operator()(const Component& c) const {
  auto it = mass.find(c);
  return it == mass.end() ? 0.0 : it->second;
}

double JointDistribution::total() const {
  double s = 0.0;
  for (const auto& [c, p] : mass) s += p;
  return s;
}

void JointDistribution::validate(double tol) const {
  if (level < 1) throw Error(ErrorKind::WrongLevel, "joint distribution level < 1");
  for (const auto& [c, p] : mass) {
    if (c.level != level)
      throw Error(ErrorKind::WrongLevel, to_string(c) + " in a level-" +
                                             std::to_string(level) + " joint");
    if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
    if (!(p >= 0.0) || !std::isfinite(p))
      throw Error(ErrorKind::NotNormalized, "negative mass on " + to_string(c));
  }
  if (std::abs(total() - 1.0) > tol)
    throw Error(ErrorKind::NotNormalized,
                "joint masses sum to " + std::to_string(total()));
}

JointDistribution JointDistribution::pruned() const {
  JointDistribution out{level, {}};
  for (const auto& [c, p] : mass)
    if (p > 0.0) out.mass[c] = p;
  return out;
}

// ---- SplitDistribution ----

int SplitDistribution::lo() const { return std::max(0, k - level_total(level - 1)); }
int SplitDistribution::hi() const { return std::min(k, level_total(level - 1)); }

double SplitDistribution::operator()(int kl) const {
  auto it = mass.find(kl);
  return it == mass.end() ? 0.0 : it->second;
}

void SplitDistribution::validate(double tol) const {
  if (level < 1) throw Error(ErrorKind::WrongLevel, "split level < 1");
  if (k < 0 || k > level_total(level))
    throw Error(ErrorKind::OutOfRange, "split parent index " + std::to_string(k));
  double s = 0.0;
  for (const auto& [kl, p] : mass) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw Error(ErrorKind::NotNormalized, "negative split mass");
    if (p > 0.0 && (kl < lo() || kl > hi()))
      throw Error(ErrorKind::InfeasibleSplit,
                  "k_l=" + std::to_string(kl) + " outside [" + std::to_string(lo()) +
                      "," + std::to_string(hi()) + "] for k=" + std::to_string(k));
    s += p;
  }
  if (std::abs(s - 1.0) > tol)
    throw Error(ErrorKind::NotNormalized, "split masses sum to " + std::to_string(s));
}

SplitDistribution SplitDistribution::point(int level, int k, int kl) {
  SplitDistribution s{level, k, {{kl, 1.0}}};
  s.validate();
  return s;
}

SplitDistribution SplitDistribution::uniform(int level, int k) {
  SplitDistribution s{level, k, {}};
  const int n = s.hi() - s.lo() + 1;
  for (int kl = s.lo(); kl <= s.hi(); ++kl) s.mass[kl] = 1.0 / n;
  return s;
}

SplitDistribution SplitDistribution::trivial(int level, int k) {
  SplitDistribution s{level, k, {}};
  s.mass[s.lo()] = 1.0;
  return s;
}

// ---- entropy ----

namespace {

template <class Range>
double entropy_of_values(const Range& values) {
  double s = 0.0, h = 0.0;
  for (double p : values) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw Error(ErrorKind::NotNormalized, "negative or non-finite mass");
    s += p;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw Error(ErrorKind::NotNormalized, "masses sum to " + std::to_string(s));
  return std::max(0.0, h);
}

template <class Map>
std::vector<double> map_values(const Map& m) {
  std::vector<double> v;
  v.reserve(m.size());
  for (const auto& kv : m) v.push_back(kv.second);
  return v;
}

}  // namespace

double entropy(const std::vector<double>& p) { return entropy_of_values(p); }
double entropy(const JointDistribution& d) { return entropy_of_values(map_values(d.mass)); }
double entropy(const MarginalDistribution& d) { return entropy_of_values(d.mass); }
double entropy(const SplitDistribution& d) { return entropy_of_values(map_values(d.mass)); }
double entropy(const TypicalDistribution& d) { return entropy_of_values(map_values(d.mass)); }

double log_multinomial(long long n, const std::vector<long long>& parts, bool asymptotic) {
  long long s = 0;
  for (long long p : parts) {
    if (p < 0) throw Error(ErrorKind::PartsMismatch, "negative part");
    s += p;
  }
  if (s != n)
    throw Error(ErrorKind::PartsMismatch,
                "parts sum to " + std::to_string(s) + ", expected " + std::to_string(n));
  if (n == 0) return 0.0;
  if (asymptotic) {
    std::vector<double> q;
    for (long long p : parts) q.push_back(static_cast<double>(p) / static_cast<double>(n));
    return static_cast<double>(n) * entropy(q);
  }
  double r = std::lgamma(static_cast<double>(n) + 1.0);
  for (long long p : parts) r -= std::lgamma(static_cast<double>(p) + 1.0);
  return r / std::log(2.0);
}

// ---- marginals ----

std::array<MarginalDistribution, 3> marginals(const JointDistribution& alpha) {
  const int n = level_total(alpha.level);
  std::array<MarginalDistribution, 3> out;
  for (int a = 0; a < 3; ++a) {
    out[a].level = alpha.level;
    out[a].axis = static_cast<Axis>(a);
    out[a].mass.assign(n + 1, 0.0);
  }
  for (const auto& [c, p] : alpha.mass)
    for (int a = 0; a < 3; ++a) out[a].mass[c.at(a)] += p;
  return out;
}

namespace {

void check_marginal(const MarginalDistribution& m, int level, const char* name) {
  if (m.level != level)
    throw Error(ErrorKind::WrongLevel, std::string(name) + " marginal level mismatch");
  if (static_cast<int>(m.mass.size()) != level_total(level) + 1)
    throw Error(ErrorKind::ValidationError, std::string(name) + " marginal has wrong length");
  double s = 0.0;
  for (double p : m.mass) {
    if (!(p >= 0.0)) throw Error(ErrorKind::NotNormalized, std::string(name) + " negative mass");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12)
    throw Error(ErrorKind::NotNormalized, std::string(name) + " marginal sums to " +
                                              std::to_string(s));
}

}  // namespace

JointDistribution level1_joint_from_marginals(const MarginalDistribution& x,
                                              const MarginalDistribution& y,
                                              const MarginalDistribution& z) {
  check_marginal(x, 1, "X");
  check_marginal(y, 1, "Y");
  check_marginal(z, 1, "Z");
  // Components with a 2 are pinned by the marginal at 2; the (0,1,1) family
  // is what remains of each zero entry.
  JointDistribution out{1, {}};
  out.mass[Component{2, 0, 0, 1}] = x.mass[2];
  out.mass[Component{0, 2, 0, 1}] = y.mass[2];
  out.mass[Component{0, 0, 2, 1}] = z.mass[2];
  out.mass[Component{0, 1, 1, 1}] = x.mass[0] - y.mass[2] - z.mass[2];
  out.mass[Component{1, 0, 1, 1}] = y.mass[0] - x.mass[2] - z.mass[2];
  out.mass[Component{1, 1, 0, 1}] = z.mass[0] - x.mass[2] - y.mass[2];
  for (auto& [c, p] : out.mass) {
    if (p < -1e-12) throw Error(ErrorKind::Infeasible, "reconstructed " + to_string(c) +
                                                           " = " + std::to_string(p));
    p = std::max(0.0, p);
  }
  // The index-1 entries are not used above; they must agree too.
  auto m = marginals(out);
  const MarginalDistribution* in[3] = {&x, &y, &z};
  for (int a = 0; a < 3; ++a)
    for (int v = 0; v <= 2; ++v)
      if (std::abs(m[a].mass[v] - in[a]->mass[v]) > 1e-9)
        throw Error(ErrorKind::Infeasible, "marginals are not consistent with any joint");
  return out;
}

IpfOptions IpfOptions::from_env() {
  IpfOptions o;
  if (const char* s = std::getenv("CWL_IPF_MAX_SWEEPS")) {
    char* end = nullptr;
    long v = std::strtol(s, &end, 10);
    if (end != s && v > 0) o.max_sweeps = v;
  }
  return o;
}

MaxEntropyResult max_entropy_with_marginals(const std::set<Component>& support,
                                            const MarginalDistribution& x,
                                            const MarginalDistribution& y,
                                            const MarginalDistribution& z,
                                            const IpfOptions& opt) {
  const int level = x.level;
  check_marginal(x, level, "X");
  check_marginal(y, level, "Y");
  check_marginal(z, level, "Z");
  const MarginalDistribution* tgt[3] = {&x, &y, &z};
  const int n = level_total(level);

  std::vector<Component> cs;
  for (const auto& c : support) {
    if (c.level != level) throw Error(ErrorKind::WrongLevel, to_string(c) + " in support");
    if (x.mass[c.i] > 0.0 && y.mass[c.j] > 0.0 && z.mass[c.k] > 0.0) cs.push_back(c);
  }
  if (cs.empty()) throw Error(ErrorKind::Infeasible, "empty support after dropping zero marginals");
  for (int a = 0; a < 3; ++a)
    for (int v = 0; v <= n; ++v) {
      if (tgt[a]->mass[v] <= 0.0) continue;
      bool covered = std::any_of(cs.begin(), cs.end(), [&](const Component& c) { return c.at(a) == v; });
      if (!covered) throw Error(ErrorKind::Infeasible, "marginal entry not covered by support");
    }

  std::vector<double> w(cs.size(), 1.0 / static_cast<double>(cs.size()));
  std::vector<double> cur(n + 1);
  auto axis_residual = [&](int a) {
    std::fill(cur.begin(), cur.end(), 0.0);
    for (size_t t = 0; t < cs.size(); ++t) cur[cs[t].at(a)] += w[t];
    double r = 0.0;
    for (int v = 0; v <= n; ++v) r += std::abs(cur[v] - tgt[a]->mass[v]);
    return r;
  };

  MaxEntropyResult res;
  double checkpoint = -1.0;
  for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (int a = 0; a < 3; ++a) {
      std::fill(cur.begin(), cur.end(), 0.0);
      for (size_t t = 0; t < cs.size(); ++t) cur[cs[t].at(a)] += w[t];
      for (size_t t = 0; t < cs.size(); ++t) {
        const double m = cur[cs[t].at(a)];
        w[t] = m > 0.0 ? w[t] * tgt[a]->mass[cs[t].at(a)] / m : 0.0;
      }
    }
    const double r = std::max(axis_residual(0), axis_residual(1));
    res.sweeps = sweep;
    res.residual = r;
    if (r < opt.tol) break;
    if (sweep % 1000 == 0) {
      if (checkpoint >= 0.0 && r > 1e-6 && r > 0.999 * checkpoint)
        throw Error(ErrorKind::Infeasible,
                    "IPF residual stalled at " + std::to_string(r));
      checkpoint = r;
    }
    if (sweep == opt.max_sweeps)
      throw Error(ErrorKind::DidNotConverge,
                  "IPF residual " + std::to_string(r) + " after " + std::to_string(sweep) +
                      " sweeps");
  }
  if (opt.max_sweeps <= 0) throw Error(ErrorKind::DidNotConverge, "zero sweep budget");

  res.joint.level = level;
  double s = 0.0;
  for (double v : w) s += v;
  for (size_t t = 0; t < cs.size(); ++t)
    if (w[t] > 0.0) res.joint.mass[cs[t]] = w[t] / s;
  res.bits = entropy(res.joint);
  return res;
}

SplitDistribution average_split(const JointDistribution& alpha, const SplitMap& splits,
                                int k, SplitRestriction restriction) {
  SplitDistribution out{alpha.level, k, {}};
  double wsum = 0.0;
  for (const auto& [c, p] : alpha.mass) {
    if (c.k != k || p <= 0.0) continue;
    if (restriction == SplitRestriction::BothPositive && (c.i == 0 || c.j == 0)) continue;
    auto it = splits.find(c);
    if (it == splits.end())
      throw Error(ErrorKind::ValidationError, "no split for " + to_string(c));
    for (const auto& [kl, s] : it->second.mass) out.mass[kl] += p * s;
    wsum += p;
  }
  if (wsum <= 0.0)
    throw Error(ErrorKind::ZeroMass, "no mass on Z index " + std::to_string(k));
  for (auto& [kl, s] : out.mass) s /= wsum;
  return out;
}

}  // namespace cwl
