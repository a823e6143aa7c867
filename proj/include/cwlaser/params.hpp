#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cwlaser/combinat.hpp"
#include "cwlaser/omega.hpp"
#include "cwlaser/values.hpp"
#include "cwlaser/verifier.hpp"

namespace cwl {

enum class Mode { Level1, Level2Nonrot, Global, Component };
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

enum class Formula { Level1, Merging, RestrictedMerging, Symhash, Sym3_112, Cw112, Component, Fixed };
const char* formula_name(Formula f);
Formula parse_formula(const std::string& s);

// How to obtain one value pair. Lower-level pairs referenced by symhash and
// component recipes are looked up by (component, id), id "main" unless
// listed in lower_ids.
struct ValueRecipe {
  Component component;
  std::string id = "main";
  Formula formula = Formula::Merging;
  std::optional<SplitDistribution> split;  // restricted_merging; absent = optimal
  double b = 0.0;                          // sym3_112
  std::optional<JointDistribution> left;   // symhash
  std::array<double, 3> A{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::array<JointDistribution, 3> regions;  // component
  std::map<Component, std::string> lower_ids;
  // fixed: a value certified elsewhere, valid for every tau >= fixed_tau.
  double fixed_tau = 0.0;
  double fixed_log2 = 0.0;
  ValueKind fixed_kind = ValueKind::Sym6;
};

struct ParamFile {
  int schema = 1;
  int q = 6;
  std::optional<double> tau;
  int level = 1;
  Mode mode = Mode::Global;
  HashingMode hashing = HashingMode::Asymmetric;
  JointDistribution alpha;
  std::optional<Level2Family> family;
  SplitMap splits;  // optional; must agree with the value pairs
  std::vector<ValueRecipe> values;
  std::optional<Component> target;  // component mode
  // Provenance, not serialized.
  std::string source_digest;
  double alpha_input_sum = 1.0;
};

// Parses TOML text; ParseError with line/field, ValidationError on invariant failures.
ParamFile parse_params(const std::string& text, const std::string& source = "<string>");
ParamFile load_params(const std::string& path);
std::string dump_params(const ParamFile& pf);
void save_params(const ParamFile& pf, const std::string& path);

std::string fnv1a_hex(const std::string& data);

// Evaluates a parameter file at any tau, recomputing the value tree.
class Pipeline {
 public:
  explicit Pipeline(ParamFile pf);

  const ParamFile& params() const { return pf_; }
  int power() const { return 1 << (pf_.level - 1); }

  ValuePair value(const Component& c, const std::string& id, double tau);
  GlobalParams global_params(double tau);
  // Mode dispatch. Level-2 non-rotational mode throws ConstraintError when
  // the hard constraint fails; evaluate() never does.
  VerifyReport verify(double tau);
  VerifyReport evaluate(double tau);
  ComponentReport verify_target(double tau);
  OmegaResult omega(double tol = 1e-9);

 private:
  const ValueRecipe* find_recipe(const Component& c, const std::string& id) const;
  ValuePair compute(const Component& c, const std::string& id, double tau, int depth);

  ParamFile pf_;
  double memo_tau_ = -1.0;
  std::map<std::pair<Component, std::string>, ValuePair> memo_;
};

// Default level-1 split of (1,1,2) with the optimal b, rotated onto c.
JointDistribution cw112_left(const Component& c, int q, double tau);

}  // namespace cwl
