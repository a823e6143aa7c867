#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cwl {

// 2^level, the index sum of a level-`level` component.
inline int level_total(int level) { return 1 << level; }

// Index triple (i, j, k) with i + j + k = 2^level.
struct Component {
  int i = 0;
  int j = 0;
  int k = 0;
  int level = 1;

  int at(int axis) const { return axis == 0 ? i : axis == 1 ? j : k; }
  int zero_count() const { return (i == 0) + (j == 0) + (k == 0); }
  bool has_zero() const { return zero_count() > 0; }
  bool valid() const {
    return level >= 1 && i >= 0 && j >= 0 && k >= 0 &&
           i + j + k == level_total(level);
  }
};

bool operator<(const Component& a, const Component& b);
bool operator==(const Component& a, const Component& b);
inline bool operator!=(const Component& a, const Component& b) { return !(a == b); }

// Throws InvalidComponent unless i + j + k = 2^level.
Component make_component(int i, int j, int k, int level);
Component rotate(const Component& c);   // (i,j,k) -> (j,k,i)
Component swap_xy(const Component& c);  // (i,j,k) -> (j,i,k)
std::string to_string(const Component& c);
std::vector<Component> all_components(int level);

enum class Axis { X = 0, Y = 1, Z = 2 };

struct JointDistribution {
  int level = 1;
  std::map<Component, double> mass;

  double operator()(const Component& c) const;
  double total() const;
  // Level match, non-negativity, normalization within tol.
  void validate(double tol = 1e-12) const;
  JointDistribution pruned() const;
};

struct MarginalDistribution {
  int level = 1;
  Axis axis = Axis::X;
  std::vector<double> mass;  // indices 0..2^level
};

// Distribution of k_l for a split k = k_l + k_r of a level-`level` index
// into two level-(level-1) indices.
struct SplitDistribution {
  int level = 1;
  int k = 0;
  std::map<int, double> mass;

  int lo() const;
  int hi() const;
  double operator()(int kl) const;
  void validate(double tol = 1e-12) const;

  static SplitDistribution point(int level, int k, int kl);
  static SplitDistribution uniform(int level, int k);
  // Forced split for k = 0 or k = 2^level; midpoint point mass otherwise.
  static SplitDistribution trivial(int level, int k);
};

using SplitMap = std::map<Component, SplitDistribution>;

// Mass over (k_l, k_r) pairs or per-region quadruples.
struct TypicalDistribution {
  int level = 1;
  std::map<std::vector<int>, double> mass;
};

double entropy(const std::vector<double>& p);
double entropy(const JointDistribution& d);
double entropy(const MarginalDistribution& d);
double entropy(const SplitDistribution& d);
double entropy(const TypicalDistribution& d);

// Exact log2 of n! / prod(parts!) via lgamma; n * H(parts / n) when
// `asymptotic` is set.
double log_multinomial(long long n, const std::vector<long long>& parts,
                       bool asymptotic = false);

std::array<MarginalDistribution, 3> marginals(const JointDistribution& alpha);

JointDistribution level1_joint_from_marginals(const MarginalDistribution& x,
                                              const MarginalDistribution& y,
                                              const MarginalDistribution& z);

struct IpfOptions {
  double tol = 1e-12;
  long max_sweeps = 100000;
  // Reads CWL_IPF_MAX_SWEEPS when set.
  static IpfOptions from_env();
};

struct MaxEntropyResult {
  JointDistribution joint;
  double bits = 0.0;
  long sweeps = 0;
  double residual = 0.0;
};

// Max-entropy joint on `support` with the given marginals, by iterative
// proportional fitting (X -> Y -> Z scaling sweeps).
MaxEntropyResult max_entropy_with_marginals(const std::set<Component>& support,
                                            const MarginalDistribution& x,
                                            const MarginalDistribution& y,
                                            const MarginalDistribution& z,
                                            const IpfOptions& opt = {});

enum class SplitRestriction { All, BothPositive };

// alpha-weighted mixture of the Z-splits of index k.
SplitDistribution average_split(const JointDistribution& alpha,
                                const SplitMap& splits, int k,
                                SplitRestriction restriction = SplitRestriction::All);

}  // namespace cwl
