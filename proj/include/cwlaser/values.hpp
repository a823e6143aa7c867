#pragma once

#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "cwlaser/combinat.hpp"

namespace cwl {

enum class ValueKind { Sym6, Sym3, Nonrot };

const char* kind_name(ValueKind k);
ValueKind parse_kind(const std::string& s);

// Lower bound on the value of a component at tau, restricted to z_split.
struct ValuePair {
  Component component;
  double tau = 1.0;
  double log2_value = 0.0;
  SplitDistribution z_split;
  ValueKind kind = ValueKind::Nonrot;

  void validate() const;
};

// Sorted (k_l, mass) pairs with masses rounded to 12 decimals.
std::string split_digest(const SplitDistribution& s);

// Value pairs keyed by (component, kind, split digest). Several pairs per
// component are allowed.
class ValueTable {
 public:
  void add(const ValuePair& v);
  const ValuePair* find(const Component& c, ValueKind kind, const std::string& digest) const;
  const ValuePair* find(const Component& c, const std::string& digest) const;
  // Largest log2_value among the pairs stored for c, or nullptr.
  const ValuePair* best(const Component& c) const;
  // best(c)->log2_value; throws MissingLowerValue.
  double log2_value(const Component& c) const;
  std::vector<ValuePair> entries() const;
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::tuple<Component, int, std::string>, ValuePair> entries_;
};

using LowerValueFn = std::function<double(const Component&)>;

// T_{0,1,1}-type components are <1,1,q>-like (tau log2 q); T_{0,0,2}-type are 1.
double level1_value(const Component& c, int q, double tau);

// tau * log2 sum_b multinomial((j+k)/2; b, (j-b)/2, (k-b)/2) q^b for the
// level-`level` component (0, j, k).
double merging_value(int j, int k, int q, double tau, int level);
// Same for any component containing a zero.
double merging_value(const Component& c, int q, double tau);

// Value of a component with exactly one zero under the Z-split restriction.
ValuePair restricted_merging_value(const Component& c, const SplitDistribution& z_split,
                                   int q, double tau);

// Split maximizing restricted_merging_value; proportional to 2^{w/tau}.
SplitDistribution optimal_merging_split(const Component& c, int q, double tau);

// Merging value with its optimal (or forced) split; handles one or two zeros.
ValuePair merging_value_pair(const Component& c, int q, double tau);

// Symmetrized T_{1,1,2} bound at level 2 with split (b, 1-2b, b).
ValuePair level2_112_value(int q, double tau, double b);
double level2_112_optimal_b(int q, double tau);

// Symmetric-hashing bound for c at level >= 2 with joint split `left`: a
// level-(l-1) distribution over left parts c', the right part being c - c'.
ValuePair symhash_value_pair(const Component& c, const JointDistribution& left,
                             const LowerValueFn& lower, double tau);
ValuePair symhash_value_pair(const Component& c, const JointDistribution& left,
                             const ValueTable& lower, double tau);

// Right part c - c' of a split, or InfeasibleSplit.
Component right_part(const Component& parent, const Component& left);

}  // namespace cwl
