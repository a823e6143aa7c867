#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cwlaser/combinat.hpp"
#include "cwlaser/omega.hpp"
#include "cwlaser/params.hpp"
#include "cwlaser/values.hpp"
#include "cwlaser/verifier.hpp"

namespace cwl {

// (2/3) left + (1/3) right, in log2.
double softmin_bound(double left, double right);

// ---- simplex ascent ----

struct AscentOptions {
  int max_iters = 3000;
  double tol = 1e-9;  // gradient-mapping norm
  double fd_step = 1e-6;
};

struct AscentResult {
  std::vector<double> x;
  double value = 0.0;
  int iters = 0;
  bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;
using GradientFn = std::function<std::vector<double>(const std::vector<double>&)>;
// Index ranges [begin, end) of x that each form a probability simplex.
using Blocks = std::vector<std::pair<int, int>>;

// Central differences; the step shrinks to half of a small coordinate.
std::vector<double> finite_difference_gradient(const Objective& f, const std::vector<double>& x,
                                               double h = 1e-6);

// Entropic mirror ascent with backtracking. Zero coordinates stay zero.
AscentResult mirror_ascent(const Objective& f, std::vector<double> x0, const Blocks& blocks,
                           const AscentOptions& opt = {}, const GradientFn& grad = {});

// f1, f2, g and their gradients at a point.
struct MinPlusTerms {
  double f1 = 0, f2 = 0, g = 0;
  std::vector<double> d1, d2, dg;
};
using MinPlusFn = std::function<MinPlusTerms(const std::vector<double>&)>;

// max_x min(f1, f2) + g, by ascent on lambda f1 + (1 - lambda) f2 + g with
// lambda bisected until the branches balance.
AscentResult maximize_min_plus(const MinPlusFn& f, std::vector<double> x0, const Blocks& blocks,
                               const AscentOptions& opt = {});

// ---- level 1 ----

struct Level1Opt {
  double b = 0.0;
  double log2_value = 0.0;
};
double level1_log2_value(int q, double tau, double b);
Level1Opt optimize_level1(int q, double tau, double tol = 1e-10);
ParamFile level1_param_file(int q, double b);

// ---- level 2, non-rotational family ----

struct Level2Iterate {
  int t = 0;
  double log2_phat_ref = 0.0;  // p_hat* used for this solve
  Level2Family family;
  double approx_objective = 0.0;
  double log2_bound = 0.0;  // verified at tau, constraint aside
  bool constraint_ok = false;
};

struct Level2Opt {
  int q = 6;
  double tau = 0.0;
  Level2Family family;
  VerifyReport report;  // verify_level2_nonrot on the output
  std::vector<Level2Iterate> history;
  double perturbation = 0.0;  // extra log2 margin added to p_hat* to restore the constraint
};

// t_max = 0 runs the initial solve (p_hat* = 1) only. Throws SolverFailure
// when no perturbation restores a_x <= a_z / p_hat.
Level2Opt optimize_level2(int q, double tau, int t_max, const AscentOptions& opt = {});
ParamFile level2_family_param_file(int q, const Level2Family& f);

struct Level2Search {
  Level2Opt best;
  OmegaResult omega;
  std::vector<double> omegas;  // omega bound after each round
};

// Alternates optimize_level2 at tau with tau <- tau* of the result.
Level2Search optimize_level2_omega(int q, int t_max, double tau0, int rounds = 6,
                                   const AscentOptions& opt = {});

// ---- component subproblem ----

struct SubproblemObjective {
  double weight_logv = 1.0;             // >= 0
  std::map<int, double> split_weights;  // by k_l
  std::string provenance;
};

struct ComponentOptOptions {
  int outer_iters = 4;
  AscentOptions ascent{600, 1e-9, 1e-6};
  bool refine = true;
};

struct ComponentOpt {
  RegionParams params;
  ValuePair value;
  double objective = 0.0;
  std::vector<double> history;  // accepted objective after each outer iteration
};

// Objective value of a region parameter set: weight * log V + split terms.
double component_objective(const RegionParams& p, const SubproblemObjective& obj, double tau);

// Start: A uniform, each region tilted toward high lower values.
RegionParams default_region_params(const Component& c, int q,
                                   const std::map<Component, ValuePair>& lower);

// lower holds one value pair per level-(l-1) component.
ComponentOpt optimize_component(const Component& c, const SubproblemObjective& obj,
                                const std::map<Component, ValuePair>& lower, double tau, int q,
                                const ComponentOptOptions& opt = {},
                                const std::optional<RegionParams>& start = std::nullopt);

// ---- framework ----

struct FrameworkOptions {
  int iterations = 4;
  int tau_rounds = 2;
  int value_pairs_per_component = 1;
  bool verbose = false;
};

struct PipelineState {
  int q = 6;
  double tau = 0.0;
  int max_level = 1;
  ParamFile params;
  double log2_bound = 0.0;           // verified at tau
  std::vector<double> history;       // accepted bounds
  OmegaResult omega;
  std::vector<std::string> log;
};

PipelineState run_framework(int q, double tau, int max_level, const FrameworkOptions& opt = {});

}  // namespace cwl
