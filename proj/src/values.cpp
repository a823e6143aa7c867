#include "cwlaser/values.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cwlaser/error.hpp"

namespace cwl {

const char* kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::Sym6: return "sym6";
    case ValueKind::Sym3: return "sym3";
    case ValueKind::Nonrot: return "nonrot";
  }
  return "?";
}

ValueKind parse_kind(const std::string& s) {
  if (s == "sym6") return ValueKind::Sym6;
  if (s == "sym3") return ValueKind::Sym3;
  if (s == "nonrot") return ValueKind::Nonrot;
  throw Error(ErrorKind::ValidationError, "unknown value kind '" + s + "'");
}

void ValuePair::validate() const {
  if (!component.valid()) throw Error(ErrorKind::InvalidComponent, to_string(component));
  if (!std::isfinite(log2_value))
    throw Error(ErrorKind::ValidationError, "non-finite value for " + to_string(component));
  if (z_split.level != component.level || z_split.k != component.k)
    throw Error(ErrorKind::ValidationError, "split does not belong to " + to_string(component));
  z_split.validate(1e-9);
}

std::string split_digest(const SplitDistribution& s) {
  std::string out = "k=" + std::to_string(s.k);
  char buf[64];
  for (const auto& [kl, p] : s.mass) {
    if (p == 0.0) continue;
    std::snprintf(buf, sizeof buf, ";%d:%.12f", kl, p);
    out += buf;
  }
  return out;
}

void ValueTable::add(const ValuePair& v) {
  entries_[{v.component, static_cast<int>(v.kind), split_digest(v.z_split)}] = v;
}

const ValuePair* ValueTable::find(const Component& c, ValueKind kind,
                                  const std::string& digest) const {
  auto it = entries_.find({c, static_cast<int>(kind), digest});
  return it == entries_.end() ? nullptr : &it->second;
}

const ValuePair* ValueTable::find(const Component& c, const std::string& digest) const {
  for (ValueKind k : {ValueKind::Nonrot, ValueKind::Sym3, ValueKind::Sym6})
    if (auto* v = find(c, k, digest)) return v;
  return nullptr;
}

const ValuePair* ValueTable::best(const Component& c) const {
  const ValuePair* out = nullptr;
  for (const auto& [key, v] : entries_)
    if (std::get<0>(key) == c && (!out || v.log2_value > out->log2_value)) out = &v;
  return out;
}

double ValueTable::log2_value(const Component& c) const {
  const ValuePair* v = best(c);
  if (!v) throw Error(ErrorKind::MissingLowerValue, "no value for " + to_string(c));
  return v->log2_value;
}

std::vector<ValuePair> ValueTable::entries() const {
  std::vector<ValuePair> out;
  for (const auto& [key, v] : entries_) out.push_back(v);
  return out;
}

// ---- closed forms ----

double level1_value(const Component& c, int q, double tau) {
  if (c.level != 1 || !c.valid())
    throw Error(ErrorKind::WrongLevel, to_string(c) + " is not a level-1 component");
  return (c.i == 2 || c.j == 2 || c.k == 2) ? 0.0 : tau * std::log2(static_cast<double>(q));
}

namespace {

double log2_sum_exp2(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp2(x - m);
  return m + std::log2(s);
}

double log2_multinomial3(int n, int a, int b, int c) {
  return (std::lgamma(n + 1.0) - std::lgamma(a + 1.0) - std::lgamma(b + 1.0) -
          std::lgamma(c + 1.0)) /
         std::log(2.0);
}

}  // namespace

double merging_value(int j, int k, int q, double tau, int level) {
  if (level < 1 || j < 0 || k < 0 || j + k != level_total(level))
    throw Error(ErrorKind::InvalidComponent,
                "(0," + std::to_string(j) + "," + std::to_string(k) + ") at level " +
                    std::to_string(level));
  if (j > k) std::swap(j, k);
  const int m = (j + k) / 2;
  const double lq = std::log2(static_cast<double>(q));
  std::vector<double> terms;
  for (int b = j % 2; b <= j; b += 2)
    terms.push_back(log2_multinomial3(m, b, (j - b) / 2, (k - b) / 2) + b * lq);
  return tau * log2_sum_exp2(terms);
}

double merging_value(const Component& c, int q, double tau) {
  if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
  if (c.i == 0) return merging_value(c.j, c.k, q, tau, c.level);
  if (c.j == 0) return merging_value(c.i, c.k, q, tau, c.level);
  if (c.k == 0) return merging_value(c.i, c.j, q, tau, c.level);
  throw Error(ErrorKind::InvalidComponent, to_string(c) + " has no zero index");
}

namespace {

// Left part of a one-zero component with k > 0, determined by k_l.
bool merging_left_part(const Component& c, int kl, Component& left) {
  const int half = level_total(c.level - 1);
  if (c.i == 0)
    left = Component{0, half - kl, kl, c.level - 1};
  else
    left = Component{half - kl, 0, kl, c.level - 1};
  if (!left.valid()) return false;
  Component r{c.i - left.i, c.j - left.j, c.k - left.k, c.level - 1};
  return r.valid();
}

void require_one_zero_with_k(const Component& c) {
  if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
  if (c.level < 2) throw Error(ErrorKind::WrongLevel, "restricted merging needs level >= 2");
  if (c.zero_count() > 1) throw Error(ErrorKind::MultipleZeros, to_string(c));
  if (c.zero_count() == 0)
    throw Error(ErrorKind::InvalidComponent, to_string(c) + " has no zero index");
}

}  // namespace

ValuePair restricted_merging_value(const Component& c, const SplitDistribution& z_split,
                                   int q, double tau) {
  require_one_zero_with_k(c);
  if (z_split.level != c.level || z_split.k != c.k)
    throw Error(ErrorKind::InfeasibleSplit, "split does not belong to " + to_string(c));
  z_split.validate(1e-9);
  if (c.k == 0) return ValuePair{c, tau, merging_value(c, q, tau), z_split, ValueKind::Nonrot};

  double v = tau * entropy(z_split);
  for (const auto& [kl, s] : z_split.mass) {
    if (s <= 0.0) continue;
    Component left;
    if (!merging_left_part(c, kl, left))
      throw Error(ErrorKind::InfeasibleSplit,
                  "k_l=" + std::to_string(kl) + " impossible for " + to_string(c));
    v += s * (merging_value(left, q, tau) + merging_value(right_part(c, left), q, tau));
  }
  return ValuePair{c, tau, v, z_split, ValueKind::Nonrot};
}

SplitDistribution optimal_merging_split(const Component& c, int q, double tau) {
  require_one_zero_with_k(c);
  SplitDistribution s{c.level, c.k, {}};
  if (c.k == 0) {
    s.mass[0] = 1.0;
    return s;
  }
  std::map<int, double> w;
  double wmax = -std::numeric_limits<double>::infinity();
  for (int kl = s.lo(); kl <= s.hi(); ++kl) {
    Component left;
    if (!merging_left_part(c, kl, left)) continue;
    w[kl] = (merging_value(left, q, tau) + merging_value(right_part(c, left), q, tau)) / tau;
    wmax = std::max(wmax, w[kl]);
  }
  double z = 0.0;
  for (auto& [kl, x] : w) z += std::exp2(x - wmax);
  for (auto& [kl, x] : w) s.mass[kl] = std::exp2(x - wmax) / z;
  return s;
}

ValuePair merging_value_pair(const Component& c, int q, double tau) {
  if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
  if (!c.has_zero()) throw Error(ErrorKind::InvalidComponent, to_string(c) + " has no zero index");
  if (c.level == 1)
    return ValuePair{c, tau, level1_value(c, q, tau), SplitDistribution::trivial(1, c.k),
                     ValueKind::Nonrot};
  if (c.zero_count() > 1 || c.k == 0) {
    // k = 0 or k = 2^level: the split is forced.
    return ValuePair{c, tau, merging_value(c, q, tau), SplitDistribution::trivial(c.level, c.k),
                     ValueKind::Nonrot};
  }
  return restricted_merging_value(c, optimal_merging_split(c, q, tau), q, tau);
}

double level2_112_optimal_b(int q, double tau) {
  return 1.0 / (2.0 + std::pow(static_cast<double>(q), 3.0 * tau));
}

ValuePair level2_112_value(int q, double tau, double b) {
  if (!(b >= 0.0 && b <= 0.5)) throw Error(ErrorKind::OutOfRange, "b must lie in [0, 1/2]");
  SplitDistribution s{2, 2, {{0, b}, {1, 1.0 - 2.0 * b}, {2, b}}};
  const double v = (2.0 + entropy(std::vector<double>{b, 1.0 - 2.0 * b, b})) / 3.0 +
                   (2.0 - 2.0 * b) * tau * std::log2(static_cast<double>(q));
  return ValuePair{Component{1, 1, 2, 2}, tau, v, s, ValueKind::Sym3};
}

Component right_part(const Component& parent, const Component& left) {
  Component r{parent.i - left.i, parent.j - left.j, parent.k - left.k, parent.level - 1};
  if (left.level != parent.level - 1 || !left.valid() || !r.valid())
    throw Error(ErrorKind::InfeasibleSplit,
                to_string(left) + " is not a left part of " + to_string(parent));
  return r;
}

ValuePair symhash_value_pair(const Component& c, const JointDistribution& left,
                             const LowerValueFn& lower, double tau) {
  if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
  if (c.level < 2) throw Error(ErrorKind::WrongLevel, "symmetric hashing needs level >= 2");
  if (left.level != c.level - 1)
    throw Error(ErrorKind::WrongLevel, "split distribution must be over level-" +
                                           std::to_string(c.level - 1) + " parts");
  left.validate(1e-9);
  auto m = marginals(left);
  double v = (entropy(m[0]) + entropy(m[1]) + entropy(m[2])) / 3.0;
  for (const auto& [cl, p] : left.mass) {
    if (p <= 0.0) continue;
    v += p * (lower(cl) + lower(right_part(c, cl)));
  }
  SplitDistribution z{c.level, c.k, {}};
  for (int kl = 0; kl < static_cast<int>(m[2].mass.size()); ++kl)
    if (m[2].mass[kl] > 0.0) z.mass[kl] = m[2].mass[kl];
  z.validate(1e-9);
  return ValuePair{c, tau, v, z, ValueKind::Sym3};
}

ValuePair symhash_value_pair(const Component& c, const JointDistribution& left,
                             const ValueTable& lower, double tau) {
  return symhash_value_pair(
      c, left, [&](const Component& x) { return lower.log2_value(x); }, tau);
}

}  // namespace cwl
