#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cwlaser/combinat.hpp"
#include "cwlaser/values.hpp"

namespace cwl {

enum class HashingMode { Asymmetric, Symmetric };

struct GlobalParams {
  int q = 6;
  int level = 1;
  double tau = 1.0;
  JointDistribution alpha;
  SplitMap splits;
  std::map<Component, ValuePair> values;
  HashingMode hashing = HashingMode::Asymmetric;
  // Enforce alpha(i,j,k) = alpha(j,k,i) = alpha(k,i,j) on components whose
  // value pair is rotation-symmetric only (sym3).
  bool require_rotation_symmetry = false;

  void validate() const;
};

enum class Branch { HashLoss, Compat, Symmetric };
const char* branch_name(Branch b);

// Every quantity is log2. `left` is n_hat + a_x - max, `right` is
// a_z - p_hat; the bound is min(left, right) + v_hat in asymmetric mode.
struct VerifyReport {
  double tau = 0.0;
  double log2_ax = 0.0;
  double log2_ay = 0.0;
  double log2_az = 0.0;
  double log2_nhat = 0.0;
  double log2_max = 0.0;
  double log2_phat = 0.0;
  double hash_loss = 0.0;  // log2(n_hat / max) <= 0
  double log2_vhat = 0.0;
  double left = 0.0;
  double right = 0.0;
  Branch branch = Branch::HashLoss;
  double log2_bound = 0.0;
  bool constraint_ok = true;  // a_x <= a_z / p_hat
  double log2_slack = 0.0;    // log2(a_z / (p_hat a_x))
  std::optional<double> log2_phat_closed;  // level-2 closed form, when computed
  long ipf_sweeps = 0;
  std::vector<std::string> notes;
};

// gamma(k_l, k_r) = sum_c alpha(c) split_c(k_l).
TypicalDistribution typical_distribution(const JointDistribution& alpha, const SplitMap& splits);

double phat_global(const JointDistribution& alpha, const SplitMap& splits);
inline double phat_global(const GlobalParams& p) { return phat_global(p.alpha, p.splits); }

enum class CountRounding { Strict, Nearest };

// log2 of the exact level-2 compatibility probability for n positions.
double log2_pcomp_exact_level2(const JointDistribution& alpha, const SplitMap& splits, long n,
                               CountRounding rounding = CountRounding::Strict);
double pcomp_exact_level2(const JointDistribution& alpha, const SplitMap& splits, long n,
                          CountRounding rounding = CountRounding::Strict);

// log2 of max entropy over joints sharing alpha's marginals; cached by
// marginal digest.
MaxEntropyResult max_entropy_for(const JointDistribution& alpha,
                                 const IpfOptions& opt = IpfOptions::from_env());
void clear_max_entropy_cache();

// Allowed gap, in bits, between marginal entropies that hashing needs equal.
inline constexpr double kMarginalEntropyTol = 1e-9;

// SymmetryViolated unless H(alpha_X) = H(alpha_Y) >= H(alpha_Z) (all equal
// under symmetric hashing).
VerifyReport verify_global(const GlobalParams& params);

// Parameters a..e of the level-2 non-rotational family.
struct Level2Family {
  double a = 0, b = 0, c = 0, d = 0, e = 0;
};
JointDistribution level2_family_alpha(const Level2Family& f);
// alpha, the A/B splits and values at tau.
GlobalParams level2_nonrot_params(int q, double tau, const Level2Family& f);
// Throws ConstraintError when a_x > a_z / p_hat.
VerifyReport verify_level2_nonrot(const GlobalParams& params);
// Same report with constraint_ok set instead of throwing.
VerifyReport evaluate_level2_nonrot(const GlobalParams& params);

struct RegionParams {
  int q = 6;
  Component component;  // level l+1, all indices > 0
  std::array<double, 3> A{1.0 / 3, 1.0 / 3, 1.0 / 3};
  // alpha[r]: joint split of rotate^r(component) over level-l left parts.
  std::array<JointDistribution, 3> alpha;
  // Value pairs of level-l components, oriented in region r's frame.
  std::array<std::map<Component, ValuePair>, 3> lower;
  // Optional requested splits: Z of region 1, Y of region 2, X of region 3.
  std::array<std::optional<SplitDistribution>, 3> marginal_targets;

  void validate() const;
};

struct RegionReport {
  double log2_ax = 0, log2_ay = 0, log2_az = 0, log2_nhat = 0, log2_max = 0, log2_phat = 0,
         log2_vhat = 0;
};

struct ComponentReport {
  ValuePair value;
  VerifyReport combined;
  std::array<RegionReport, 3> regions;
};

Component region_component(const Component& c, int r);
TypicalDistribution typical_distribution_region(const RegionParams& p, int r);
double phat_region(const RegionParams& p, int r);
ComponentReport verify_component_report(const RegionParams& params, double tau);
ValuePair verify_component(const RegionParams& params, double tau);

}  // namespace cwl
