#include "cwlaser/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#define TOML_ENABLE_FORMATTERS 1
#include <toml.hpp>

#include "cwlaser/error.hpp"

namespace cwl {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Level1: return "level1";
    case Mode::Level2Nonrot: return "level2_nonrot";
    case Mode::Global: return "global";
    case Mode::Component: return "component";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "level1") return Mode::Level1;
  if (s == "level2_nonrot") return Mode::Level2Nonrot;
  if (s == "global") return Mode::Global;
  if (s == "component") return Mode::Component;
  throw Error(ErrorKind::ValidationError, "unknown mode '" + s + "'");
}

const char* formula_name(Formula f) {
  switch (f) {
    case Formula::Level1: return "level1";
    case Formula::Merging: return "merging";
    case Formula::RestrictedMerging: return "restricted_merging";
    case Formula::Symhash: return "symhash";
    case Formula::Sym3_112: return "sym3_112";
    case Formula::Cw112: return "cw_112";
    case Formula::Component: return "component";
    case Formula::Fixed: return "fixed";
  }
  return "?";
}

Formula parse_formula(const std::string& s) {
  for (Formula f : {Formula::Level1, Formula::Merging, Formula::RestrictedMerging, Formula::Symhash,
                    Formula::Sym3_112, Formula::Cw112, Formula::Component, Formula::Fixed})
    if (s == formula_name(f)) return f;
  throw Error(ErrorKind::ValidationError, "unknown formula '" + s + "'");
}

std::string fnv1a_hex(const std::string& data) {
  unsigned long long h = 1469598103934665603ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", h);
  return buf;
}

// ---- parsing ----

namespace {

// Published parameter tables print masses to 6-10 digits; sums within this of 1 are
// renormalized, anything further is a malformed file.
constexpr double kInputSumTol = 1e-5;

std::string where(const toml::node& n, const std::string& field) {
  const auto& src = n.source();
  return field + " (line " + std::to_string(src.begin.line) + ")";
}

[[noreturn]] void parse_fail(const toml::node& n, const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::ParseError, where(n, field) + ": " + msg);
}

double num(const toml::node& n, const std::string& field) {
  if (auto v = n.value<double>()) return *v;
  parse_fail(n, field, "expected a number");
}

int integer(const toml::node& n, const std::string& field) {
  if (auto v = n.value<int64_t>()) return static_cast<int>(*v);
  parse_fail(n, field, "expected an integer");
}

const toml::array& arr(const toml::node& n, const std::string& field) {
  if (auto* a = n.as_array()) return *a;
  parse_fail(n, field, "expected an array");
}

Component parse_component(const toml::node& n, int level, const std::string& field) {
  const auto& a = arr(n, field);
  if (a.size() != 3) parse_fail(n, field, "component needs three indices");
  Component c{integer(a[0], field), integer(a[1], field), integer(a[2], field), level};
  if (!c.valid())
    throw Error(ErrorKind::ValidationError, where(n, field) + ": " + to_string(c) +
                                                " does not sum to 2^" + std::to_string(level));
  return c;
}

void normalize_joint(JointDistribution& d, const std::string& field, double* raw = nullptr) {
  double s = 0.0;
  for (auto& [c, p] : d.mass) {
    if (!(p >= 0.0)) throw Error(ErrorKind::ValidationError, field + ": negative mass on " + to_string(c));
    s += p;
  }
  if (raw) *raw = s;
  if (std::abs(s - 1.0) > kInputSumTol)
    throw Error(ErrorKind::ValidationError,
                field + ": masses sum to " + std::to_string(s) + ", not 1");
  // Leave rounding-level sums alone so that save/load is exact.
  if (std::abs(s - 1.0) <= 1e-13) return;
  for (auto& [c, p] : d.mass) p /= s;
}

JointDistribution parse_joint_rows(const toml::node& n, int level, const std::string& field,
                                   double* raw = nullptr) {
  JointDistribution d{level, {}};
  for (const auto& row : arr(n, field)) {
    const auto& r = arr(row, field);
    if (r.size() != 4) parse_fail(row, field, "rows are [i, j, k, mass]");
    Component c{integer(r[0], field), integer(r[1], field), integer(r[2], field), level};
    if (!c.valid())
      throw Error(ErrorKind::ValidationError, where(row, field) + ": " + to_string(c) +
                                                  " is not a level-" + std::to_string(level) +
                                                  " component");
    if (d.mass.count(c)) throw Error(ErrorKind::ValidationError, where(row, field) + ": duplicate row");
    d.mass[c] = num(r[3], field);
  }
  normalize_joint(d, field, raw);
  return d;
}

SplitDistribution parse_split_rows(const toml::node& n, int level, int k, const std::string& field) {
  SplitDistribution s{level, k, {}};
  double sum = 0.0;
  for (const auto& row : arr(n, field)) {
    const auto& r = arr(row, field);
    if (r.size() != 2) parse_fail(row, field, "rows are [k_l, mass]");
    const int kl = integer(r[0], field);
    const double p = num(r[1], field);
    if (!(p >= 0.0)) throw Error(ErrorKind::ValidationError, where(row, field) + ": negative mass");
    s.mass[kl] += p;
    sum += p;
  }
  if (std::abs(sum - 1.0) > kInputSumTol)
    throw Error(ErrorKind::ValidationError, field + ": split masses sum to " + std::to_string(sum));
  if (std::abs(sum - 1.0) > 1e-13)
    for (auto& [kl, p] : s.mass) p /= sum;
  try {
    s.validate(1e-9);
  } catch (const Error& e) {
    throw Error(ErrorKind::ValidationError, field + ": " + e.what());
  }
  return s;
}

ValueRecipe parse_recipe(const toml::table& t, int file_level, size_t idx) {
  const std::string f = "values[" + std::to_string(idx) + "]";
  ValueRecipe r;
  int level = file_level;
  if (auto* n = t.get("level")) level = integer(*n, f + ".level");
  if (level < 1 || level > 6) throw Error(ErrorKind::ValidationError, f + ".level out of range");
  auto* cn = t.get("component");
  if (!cn) throw Error(ErrorKind::ParseError, f + ": missing 'component'");
  r.component = parse_component(*cn, level, f + ".component");
  if (auto* n = t.get("id")) {
    if (auto v = n->value<std::string>()) r.id = *v;
    else parse_fail(*n, f + ".id", "expected a string");
  }
  auto* fn = t.get("formula");
  if (!fn || !fn->value<std::string>()) throw Error(ErrorKind::ParseError, f + ": missing 'formula'");
  r.formula = parse_formula(*fn->value<std::string>());
  const Component& c = r.component;
  switch (r.formula) {
    case Formula::Level1:
    case Formula::Merging:
    case Formula::Cw112:
      break;
    case Formula::RestrictedMerging:
      if (auto* n = t.get("split")) {
        if (auto s = n->value<std::string>()) {
          if (*s != "optimal") parse_fail(*n, f + ".split", "expected rows or \"optimal\"");
        } else {
          r.split = parse_split_rows(*n, level, c.k, f + ".split");
        }
      }
      break;
    case Formula::Sym3_112: {
      auto* n = t.get("b");
      if (!n) throw Error(ErrorKind::ParseError, f + ": sym3_112 needs 'b'");
      r.b = num(*n, f + ".b");
      break;
    }
    case Formula::Symhash: {
      auto* n = t.get("left");
      if (!n) throw Error(ErrorKind::ParseError, f + ": symhash needs 'left'");
      if (level < 2) throw Error(ErrorKind::ValidationError, f + ": symhash needs level >= 2");
      r.left = parse_joint_rows(*n, level - 1, f + ".left");
      break;
    }
    case Formula::Component: {
      if (level < 2) throw Error(ErrorKind::ValidationError, f + ": component needs level >= 2");
      auto* an = t.get("A");
      if (!an) throw Error(ErrorKind::ParseError, f + ": component needs 'A'");
      const auto& a = arr(*an, f + ".A");
      if (a.size() != 3) parse_fail(*an, f + ".A", "A has three entries");
      double s = 0.0;
      for (int q = 0; q < 3; ++q) {
        r.A[q] = num(a[q], f + ".A");
        if (!(r.A[q] >= 0.0)) throw Error(ErrorKind::ValidationError, f + ".A: negative weight");
        s += r.A[q];
      }
      if (std::abs(s - 1.0) > kInputSumTol)
        throw Error(ErrorKind::ValidationError, f + ".A does not sum to 1");
      if (std::abs(s - 1.0) > 1e-13)
        for (auto& x : r.A) x /= s;
      for (int q = 0; q < 3; ++q) {
        const std::string key = "region" + std::to_string(q + 1);
        if (auto* n = t.get(key)) {
          r.regions[q] = parse_joint_rows(*n, level - 1, f + "." + key);
        } else if (r.A[q] > 0.0) {
          throw Error(ErrorKind::ParseError, f + ": missing '" + key + "'");
        } else {
          r.regions[q] = JointDistribution{level - 1, {}};
        }
      }
      break;
    }
    case Formula::Fixed: {
      auto* tn = t.get("tau");
      auto* vn = t.get("log2_value");
      auto* sn = t.get("split");
      if (!tn || !vn || !sn) throw Error(ErrorKind::ParseError, f + ": fixed needs tau, log2_value, split");
      r.fixed_tau = num(*tn, f + ".tau");
      r.fixed_log2 = num(*vn, f + ".log2_value");
      if (!std::isfinite(r.fixed_log2)) throw Error(ErrorKind::ValidationError, f + ": non-finite value");
      r.split = parse_split_rows(*sn, level, c.k, f + ".split");
      if (auto* kn = t.get("kind")) r.fixed_kind = parse_kind(kn->value<std::string>().value_or("?"));
      if (auto* dn = t.get("digest")) {
        const std::string d = dn->value<std::string>().value_or("");
        if (d != split_digest(*r.split))
          throw Error(ErrorKind::ValidationError, f + ": split digest mismatch");
      }
      break;
    }
  }
  if (auto* n = t.get("lower")) {
    for (const auto& row : arr(*n, f + ".lower")) {
      const auto& a = arr(row, f + ".lower");
      if (a.size() != 4) parse_fail(row, f + ".lower", "rows are [i, j, k, id]");
      Component lc{integer(a[0], f + ".lower"), integer(a[1], f + ".lower"),
                   integer(a[2], f + ".lower"), level - 1};
      if (!lc.valid()) throw Error(ErrorKind::ValidationError, f + ".lower: invalid component");
      auto id = a[3].value<std::string>();
      if (!id) parse_fail(a[3], f + ".lower", "expected an id string");
      r.lower_ids[lc] = *id;
    }
  }
  return r;
}

}  // namespace

ParamFile parse_params(const std::string& text, const std::string& source) {
  toml::table t;
  try {
    t = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::ParseError, source + " line " + std::to_string(e.source().begin.line) +
                                           ": " + std::string(e.description()));
  }
  ParamFile pf;
  pf.source_digest = fnv1a_hex(text);
  if (auto* n = t.get("schema")) pf.schema = integer(*n, "schema");
  if (pf.schema != 1) throw Error(ErrorKind::ValidationError, "unsupported schema version");
  auto* qn = t.get("q");
  if (!qn) throw Error(ErrorKind::ParseError, "missing 'q'");
  pf.q = integer(*qn, "q");
  if (pf.q < 1) throw Error(ErrorKind::ValidationError, "q must be positive");
  auto* ln = t.get("level");
  if (!ln) throw Error(ErrorKind::ParseError, "missing 'level'");
  pf.level = integer(*ln, "level");
  if (pf.level < 1 || pf.level > 6) throw Error(ErrorKind::ValidationError, "level must be in 1..6");
  auto* mn = t.get("mode");
  if (!mn || !mn->value<std::string>()) throw Error(ErrorKind::ParseError, "missing 'mode'");
  pf.mode = parse_mode(*mn->value<std::string>());
  pf.hashing = pf.mode == Mode::Level1 ? HashingMode::Symmetric : HashingMode::Asymmetric;
  if (auto* n = t.get("hashing")) {
    const std::string h = n->value<std::string>().value_or("");
    if (h == "symmetric") pf.hashing = HashingMode::Symmetric;
    else if (h == "asymmetric") pf.hashing = HashingMode::Asymmetric;
    else throw Error(ErrorKind::ValidationError, "hashing must be symmetric or asymmetric");
  }
  if (auto* n = t.get("tau")) {
    pf.tau = num(*n, "tau");
    if (!(*pf.tau >= 2.0 / 3.0 && *pf.tau <= 1.0))
      throw Error(ErrorKind::ValidationError, "tau must lie in [2/3, 1]");
  }
  if (pf.mode == Mode::Level1 && pf.level != 1)
    throw Error(ErrorKind::ValidationError, "level1 mode needs level = 1");
  if (pf.mode == Mode::Level2Nonrot && pf.level != 2)
    throw Error(ErrorKind::ValidationError, "level2_nonrot mode needs level = 2");

  if (auto* n = t.get("family")) {
    auto* ft = n->as_table();
    if (!ft) parse_fail(*n, "family", "expected a table");
    Level2Family f;
    double* slots[5] = {&f.a, &f.b, &f.c, &f.d, &f.e};
    const char* names[5] = {"a", "b", "c", "d", "e"};
    for (int s = 0; s < 5; ++s) {
      auto* v = ft->get(names[s]);
      if (!v) throw Error(ErrorKind::ParseError, std::string("family.") + names[s] + " missing");
      *slots[s] = num(*v, std::string("family.") + names[s]);
    }
    pf.family = f;
  }
  if (auto* n = t.get("alpha")) {
    pf.alpha = parse_joint_rows(*n, pf.level, "alpha", &pf.alpha_input_sum);
  } else if (pf.family) {
    pf.alpha = level2_family_alpha(*pf.family);
    normalize_joint(pf.alpha, "family", &pf.alpha_input_sum);
  } else if (pf.mode != Mode::Component) {
    throw Error(ErrorKind::ParseError, "missing 'alpha'");
  }
  pf.alpha.level = pf.level;

  if (auto* n = t.get("splits")) {
    std::map<Component, std::vector<std::pair<int, double>>> rows;
    for (const auto& row : arr(*n, "splits")) {
      const auto& r = arr(row, "splits");
      if (r.size() != 5) parse_fail(row, "splits", "rows are [i, j, k, k_l, mass]");
      Component c{integer(r[0], "splits"), integer(r[1], "splits"), integer(r[2], "splits"), pf.level};
      if (!c.valid()) throw Error(ErrorKind::ValidationError, where(row, "splits") + ": invalid component");
      rows[c].push_back({integer(r[3], "splits"), num(r[4], "splits")});
    }
    for (const auto& [c, rs] : rows) {
      SplitDistribution s{pf.level, c.k, {}};
      double sum = 0.0;
      for (auto [kl, p] : rs) {
        s.mass[kl] += p;
        sum += p;
      }
      if (std::abs(sum - 1.0) > kInputSumTol)
        throw Error(ErrorKind::ValidationError, "splits for " + to_string(c) + " do not sum to 1");
      if (std::abs(sum - 1.0) > 1e-13)
        for (auto& [kl, p] : s.mass) p /= sum;
      try {
        s.validate(1e-9);
      } catch (const Error& e) {
        throw Error(ErrorKind::ValidationError, "splits for " + to_string(c) + ": " + e.what());
      }
      pf.splits[c] = s;
    }
  }

  if (auto* n = t.get("values")) {
    auto* a = n->as_array();
    if (!a) parse_fail(*n, "values", "expected an array of tables");
    size_t idx = 0;
    for (const auto& e : *a) {
      auto* vt = e.as_table();
      if (!vt) parse_fail(e, "values", "expected a table");
      pf.values.push_back(parse_recipe(*vt, pf.level, idx++));
    }
  }
  for (size_t x = 0; x < pf.values.size(); ++x)
    for (size_t y = x + 1; y < pf.values.size(); ++y)
      if (pf.values[x].component == pf.values[y].component && pf.values[x].id == pf.values[y].id)
        throw Error(ErrorKind::ValidationError,
                    "duplicate value recipe for " + to_string(pf.values[x].component));

  if (auto* n = t.get("target")) pf.target = parse_component(*n, pf.level, "target");
  if (pf.mode == Mode::Component && !pf.target)
    throw Error(ErrorKind::ParseError, "component mode needs 'target'");
  return pf;
}

ParamFile load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_params(ss.str(), path);
}

// ---- serialization ----

namespace {

toml::array component_array(const Component& c) { return toml::array{c.i, c.j, c.k}; }

toml::array joint_rows(const JointDistribution& d) {
  toml::array a;
  for (const auto& [c, p] : d.mass) a.push_back(toml::array{c.i, c.j, c.k, p});
  return a;
}

toml::array split_rows(const SplitDistribution& s) {
  toml::array a;
  for (const auto& [kl, p] : s.mass) a.push_back(toml::array{kl, p});
  return a;
}

}  // namespace

std::string dump_params(const ParamFile& pf) {
  toml::table t;
  t.insert("schema", pf.schema);
  t.insert("q", pf.q);
  t.insert("level", pf.level);
  t.insert("mode", mode_name(pf.mode));
  t.insert("hashing", pf.hashing == HashingMode::Symmetric ? "symmetric" : "asymmetric");
  if (pf.tau) t.insert("tau", *pf.tau);
  if (!pf.alpha.mass.empty()) t.insert("alpha", joint_rows(pf.alpha));
  if (!pf.splits.empty()) {
    toml::array a;
    for (const auto& [c, s] : pf.splits)
      for (const auto& [kl, p] : s.mass) a.push_back(toml::array{c.i, c.j, c.k, kl, p});
    t.insert("splits", a);
  }
  if (pf.target) t.insert("target", component_array(*pf.target));
  toml::array vals;
  for (const auto& r : pf.values) {
    toml::table v;
    v.insert("component", component_array(r.component));
    v.insert("level", r.component.level);
    v.insert("id", r.id);
    v.insert("formula", formula_name(r.formula));
    switch (r.formula) {
      case Formula::RestrictedMerging:
        if (r.split) v.insert("split", split_rows(*r.split));
        break;
      case Formula::Sym3_112:
        v.insert("b", r.b);
        break;
      case Formula::Symhash:
        v.insert("left", joint_rows(*r.left));
        break;
      case Formula::Component:
        v.insert("A", toml::array{r.A[0], r.A[1], r.A[2]});
        for (int q = 0; q < 3; ++q)
          v.insert("region" + std::to_string(q + 1), joint_rows(r.regions[q]));
        break;
      case Formula::Fixed:
        v.insert("tau", r.fixed_tau);
        v.insert("log2_value", r.fixed_log2);
        v.insert("kind", kind_name(r.fixed_kind));
        v.insert("split", split_rows(*r.split));
        v.insert("digest", split_digest(*r.split));
        break;
      default:
        break;
    }
    if (!r.lower_ids.empty()) {
      toml::array a;
      for (const auto& [c, id] : r.lower_ids) a.push_back(toml::array{c.i, c.j, c.k, id});
      v.insert("lower", a);
    }
    vals.push_back(v);
  }
  if (!vals.empty()) t.insert("values", vals);
  std::ostringstream os;
  os << t << "\n";
  return os.str();
}

void save_params(const ParamFile& pf, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::ValidationError, "cannot write " + path);
  out << dump_params(pf);
}

// ---- pipeline ----

JointDistribution cw112_left(const Component& c, int q, double tau) {
  const Component base{1, 1, 2, 2};
  int rot = -1;
  for (int r = 0; r < 3; ++r)
    if (region_component(base, r) == c) rot = r;
  if (rot < 0) throw Error(ErrorKind::InvalidComponent, to_string(c) + " is not in the (1,1,2) family");
  const double b = level2_112_optimal_b(q, tau);
  const double a = 0.5 - b;
  JointDistribution d{1, {}};
  const std::pair<Component, double> parts[4] = {{Component{0, 1, 1, 1}, a},
                                                 {Component{1, 0, 1, 1}, a},
                                                 {Component{1, 1, 0, 1}, b},
                                                 {Component{0, 0, 2, 1}, b}};
  for (const auto& [p, m] : parts) d.mass[region_component(p, rot)] += m;
  return d;
}

Pipeline::Pipeline(ParamFile pf) : pf_(std::move(pf)) {}

const ValueRecipe* Pipeline::find_recipe(const Component& c, const std::string& id) const {
  for (const auto& r : pf_.values)
    if (r.component == c && r.id == id) return &r;
  return nullptr;
}

ValuePair Pipeline::value(const Component& c, const std::string& id, double tau) {
  return compute(c, id, tau, 0);
}

ValuePair Pipeline::compute(const Component& c, const std::string& id, double tau, int depth) {
  if (tau != memo_tau_) {
    memo_.clear();
    memo_tau_ = tau;
  }
  auto key = std::make_pair(c, id);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  if (depth > 8) throw Error(ErrorKind::ValidationError, "value recursion too deep");
  const int q = pf_.q;
  const ValueRecipe* r = find_recipe(c, id);
  ValuePair v;
  if (!r) {
    if (id != "main")
      throw Error(ErrorKind::MissingLowerValue, "no value '" + id + "' for " + to_string(c));
    if (c.level == 1) {
      v = ValuePair{c, tau, level1_value(c, q, tau), SplitDistribution::trivial(1, c.k), ValueKind::Nonrot};
    } else if (c.has_zero()) {
      v = merging_value_pair(c, q, tau);
    } else if (c.level == 2) {
      v = symhash_value_pair(c, cw112_left(c, q, tau),
                             [&](const Component& x) { return compute(x, "main", tau, depth + 1).log2_value; },
                             tau);
    } else {
      throw Error(ErrorKind::MissingLowerValue, "no value recipe for " + to_string(c));
    }
    memo_[key] = v;
    return v;
  }
  auto lower_fn = [&](const Component& x) {
    auto it = r->lower_ids.find(x);
    return compute(x, it == r->lower_ids.end() ? "main" : it->second, tau, depth + 1);
  };
  switch (r->formula) {
    case Formula::Level1:
      v = ValuePair{c, tau, level1_value(c, q, tau), SplitDistribution::trivial(1, c.k), ValueKind::Nonrot};
      break;
    case Formula::Merging:
      v = merging_value_pair(c, q, tau);
      break;
    case Formula::RestrictedMerging:
      v = r->split ? restricted_merging_value(c, *r->split, q, tau)
                   : restricted_merging_value(c, optimal_merging_split(c, q, tau), q, tau);
      break;
    case Formula::Sym3_112:
      if (c != Component{1, 1, 2, 2})
        throw Error(ErrorKind::ValidationError, "sym3_112 applies to (1,1,2) at level 2 only");
      v = level2_112_value(q, tau, r->b);
      break;
    case Formula::Cw112:
      v = symhash_value_pair(c, cw112_left(c, q, tau),
                             [&](const Component& x) { return lower_fn(x).log2_value; }, tau);
      break;
    case Formula::Symhash:
      v = symhash_value_pair(c, *r->left, [&](const Component& x) { return lower_fn(x).log2_value; },
                             tau);
      break;
    case Formula::Component: {
      RegionParams rp;
      rp.q = q;
      rp.component = c;
      rp.A = r->A;
      for (int t = 0; t < 3; ++t) {
        rp.alpha[t] = r->regions[t];
        if (rp.A[t] <= 0.0) continue;
        const Component P = region_component(c, t);
        for (const auto& [cl, p] : rp.alpha[t].mass) {
          if (p <= 0.0) continue;
          rp.lower[t][cl] = lower_fn(cl);
          const Component cr = right_part(P, cl);
          rp.lower[t][cr] = lower_fn(cr);
        }
      }
      v = verify_component(rp, tau);
      break;
    }
    case Formula::Fixed:
      if (tau < r->fixed_tau - 1e-15)
        throw Error(ErrorKind::OutOfRange, "fixed value for " + to_string(c) + " holds only for tau >= " +
                                               std::to_string(r->fixed_tau));
      // Values are non-decreasing in tau, so the certified number carries over.
      v = ValuePair{c, tau, r->fixed_log2, *r->split, r->fixed_kind};
      break;
  }
  memo_[key] = v;
  return v;
}

GlobalParams Pipeline::global_params(double tau) {
  GlobalParams gp;
  gp.q = pf_.q;
  gp.level = pf_.level;
  gp.tau = tau;
  gp.alpha = pf_.alpha.pruned();
  gp.alpha.level = pf_.level;
  gp.hashing = pf_.hashing;
  if (pf_.mode == Mode::Level2Nonrot) {
    Level2Family f;
    if (pf_.family) {
      f = *pf_.family;
    } else {
      f.a = pf_.alpha(Component{0, 2, 2, 2});
      f.b = pf_.alpha(Component{2, 2, 0, 2});
      f.c = pf_.alpha(Component{1, 1, 2, 2});
      f.d = pf_.alpha(Component{0, 0, 4, 2});
      f.e = pf_.alpha(Component{0, 1, 3, 2});
    }
    GlobalParams built = level2_nonrot_params(pf_.q, tau, f);
    for (const auto& [c, p] : gp.alpha.mass) {
      gp.values[c] = built.values.at(c);
      gp.splits[c] = built.splits.at(c);
    }
    return gp;
  }
  for (const auto& [c, p] : gp.alpha.mass) {
    ValuePair v = value(c, "main", tau);
    auto it = pf_.splits.find(c);
    if (it != pf_.splits.end() && split_digest(it->second) != split_digest(v.z_split))
      throw Error(ErrorKind::ValidationError,
                  "declared split for " + to_string(c) + " differs from its value pair's split");
    gp.values[c] = v;
    gp.splits[c] = v.z_split;
  }
  return gp;
}

VerifyReport Pipeline::evaluate(double tau) {
  switch (pf_.mode) {
    case Mode::Level2Nonrot:
      return evaluate_level2_nonrot(global_params(tau));
    case Mode::Component:
      return verify_target(tau).combined;
    default:
      return verify_global(global_params(tau));
  }
}

VerifyReport Pipeline::verify(double tau) {
  if (pf_.mode == Mode::Level2Nonrot) return verify_level2_nonrot(global_params(tau));
  return evaluate(tau);
}

ComponentReport Pipeline::verify_target(double tau) {
  if (!pf_.target) throw Error(ErrorKind::ValidationError, "no target component");
  const ValueRecipe* r = find_recipe(*pf_.target, "main");
  if (!r || r->formula != Formula::Component)
    throw Error(ErrorKind::ValidationError, "target needs a 'component' recipe with id main");
  RegionParams rp;
  rp.q = pf_.q;
  rp.component = *pf_.target;
  rp.A = r->A;
  for (int t = 0; t < 3; ++t) {
    rp.alpha[t] = r->regions[t];
    if (rp.A[t] <= 0.0) continue;
    const Component P = region_component(rp.component, t);
    for (const auto& [cl, p] : rp.alpha[t].mass) {
      if (p <= 0.0) continue;
      for (const Component& x : {cl, right_part(P, cl)}) {
        auto it = r->lower_ids.find(x);
        rp.lower[t][x] = value(x, it == r->lower_ids.end() ? "main" : it->second, tau);
      }
    }
  }
  return verify_component_report(rp, tau);
}

OmegaResult Pipeline::omega(double tol) {
  if (pf_.mode == Mode::Component)
    throw Error(ErrorKind::ValidationError, "omega needs a global parameter file");
  auto fn = [&](double tau) {
    try {
      return evaluate(tau).log2_bound;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::OutOfRange) return -std::numeric_limits<double>::infinity();
      throw;
    }
  };
  OmegaResult res = omega_from_value(fn, pf_.q, power(), tol);
  if (pf_.mode == Mode::Level2Nonrot) verify(res.tau_star);
  return res;
}

}  // namespace cwl
