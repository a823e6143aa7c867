#include "cwlaser/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>

#include "cwlaser/error.hpp"

namespace cwl {

namespace {

constexpr double kInvLn2 = 1.4426950408889634;
constexpr double kFloor = 1e-300;

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double entropy_of(const std::vector<double>& m) {
  double h = 0.0;
  for (double p : m) h -= xlog2x(p);
  return h;
}

// d/dp of -p log2 p.
double dentropy(double p) { return -std::log2(std::max(p, kFloor)) - kInvLn2; }

void normalize_blocks(std::vector<double>& x, const Blocks& blocks) {
  for (auto [b, e] : blocks) {
    double s = 0.0;
    for (int i = b; i < e; ++i) s += x[i];
    if (!(s > 0.0)) throw Error(ErrorKind::SolverFailure, "empty simplex block");
    for (int i = b; i < e; ++i) x[i] /= s;
  }
}

}  // namespace

double softmin_bound(double left, double right) { return (2.0 * left + right) / 3.0; }

// ---- simplex ascent ----

std::vector<double> finite_difference_gradient(const Objective& f, const std::vector<double>& x,
                                               double h) {
  std::vector<double> g(x.size(), 0.0), y = x;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0) continue;
    const double step = std::min(h, x[i] / 2.0);
    y[i] = x[i] + step;
    const double fp = f(y);
    y[i] = x[i] - step;
    const double fm = f(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

AscentResult mirror_ascent(const Objective& f, std::vector<double> x0, const Blocks& blocks,
                           const AscentOptions& opt, const GradientFn& grad) {
  AscentResult res;
  normalize_blocks(x0, blocks);
  res.x = std::move(x0);
  res.value = f(res.x);
  if (!std::isfinite(res.value)) throw Error(ErrorKind::SolverFailure, "objective is not finite at the start");
  double eta = 1.0;
  std::vector<double> y(res.x.size());
  for (res.iters = 0; res.iters < opt.max_iters; ++res.iters) {
    const std::vector<double> g = grad ? grad(res.x) : finite_difference_gradient(f, res.x, opt.fd_step);
    bool moved = false;
    while (eta > 1e-18) {
      y = res.x;
      for (auto [b, e] : blocks) {
        double gmax = -std::numeric_limits<double>::infinity();
        for (int i = b; i < e; ++i)
          if (res.x[i] > 0.0) gmax = std::max(gmax, g[i]);
        double s = 0.0;
        for (int i = b; i < e; ++i) {
          if (res.x[i] <= 0.0) continue;
          y[i] = std::max(res.x[i] * std::exp2(eta * (g[i] - gmax)), kFloor);
          s += y[i];
        }
        for (int i = b; i < e; ++i)
          if (res.x[i] > 0.0) y[i] /= s;
      }
      const double fy = f(y);
      if (std::isfinite(fy) && fy >= res.value) {
        double dist = 0.0;
        for (size_t i = 0; i < y.size(); ++i) dist += std::abs(y[i] - res.x[i]);
        res.x = y;
        res.value = fy;
        moved = true;
        if (dist / eta < opt.tol) res.converged = true;
        eta = std::min(eta * 2.0, 1e6);
        break;
      }
      eta *= 0.5;
    }
    if (!moved) {
      // No ascent direction left at machine precision.
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }
  return res;
}

AscentResult maximize_min_plus(const MinPlusFn& f, std::vector<double> x0, const Blocks& blocks,
                               const AscentOptions& opt) {
  auto actual = [&](const std::vector<double>& x) {
    MinPlusTerms t = f(x);
    return std::min(t.f1, t.f2) + t.g;
  };
  AscentResult best;
  best.value = -std::numeric_limits<double>::infinity();
  auto solve = [&](double lam, const std::vector<double>& start, double& gap) {
    Objective F = [&](const std::vector<double>& x) {
      MinPlusTerms t = f(x);
      return lam * t.f1 + (1.0 - lam) * t.f2 + t.g;
    };
    GradientFn G = [&](const std::vector<double>& x) {
      MinPlusTerms t = f(x);
      std::vector<double> d(x.size());
      for (size_t i = 0; i < x.size(); ++i) d[i] = lam * t.d1[i] + (1.0 - lam) * t.d2[i] + t.dg[i];
      return d;
    };
    AscentResult r = mirror_ascent(F, start, blocks, opt, G);
    MinPlusTerms t = f(r.x);
    gap = t.f1 - t.f2;
    const double v = std::min(t.f1, t.f2) + t.g;
    if (v > best.value) {
      best = r;
      best.value = v;
    }
    return r;
  };
  double gap = 0.0;
  AscentResult r1 = solve(1.0, x0, gap);
  if (gap <= 0.0) return best;
  AscentResult r0 = solve(0.0, x0, gap);
  if (gap >= 0.0) return best;
  double lo = 0.0, hi = 1.0;
  std::vector<double> warm = r0.x;
  for (int it = 0; it < 48; ++it) {
    const double mid = 0.5 * (lo + hi);
    AscentResult r = solve(mid, warm, gap);
    warm = r.x;
    if (std::abs(gap) < 1e-13) break;
    (gap > 0.0 ? hi : lo) = mid;
  }
  best.value = actual(best.x);
  return best;
}

// ---- level 1 ----

double level1_log2_value(int q, double tau, double b) {
  const double a = (1.0 - 3.0 * b) / 3.0;
  return 3.0 * tau * a * std::log2(static_cast<double>(q)) + entropy_of({a + 2.0 * b, 2.0 * a, b});
}

Level1Opt optimize_level1(int q, double tau, double tol) {
  if (q < 2) throw Error(ErrorKind::ValidationError, "q must be at least 2");
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0 / 3.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = level1_log2_value(q, tau, x1), f2 = level1_log2_value(q, tau, x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = level1_log2_value(q, tau, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = level1_log2_value(q, tau, x1);
    }
  }
  Level1Opt out;
  out.b = 0.5 * (lo + hi);
  out.log2_value = level1_log2_value(q, tau, out.b);
  return out;
}

ParamFile level1_param_file(int q, double b) {
  ParamFile pf;
  pf.q = q;
  pf.level = 1;
  pf.mode = Mode::Level1;
  pf.hashing = HashingMode::Symmetric;
  const double a = (1.0 - 3.0 * b) / 3.0;
  pf.alpha = JointDistribution{1, {}};
  for (auto c : {Component{0, 1, 1, 1}, Component{1, 0, 1, 1}, Component{1, 1, 0, 1}}) pf.alpha.mass[c] = a;
  for (auto c : {Component{0, 0, 2, 1}, Component{0, 2, 0, 1}, Component{2, 0, 0, 1}}) pf.alpha.mass[c] = b;
  return pf;
}

// ---- level 2 family ----

namespace {

// Variables u = (2a, b, 3c, 3d, 6e); each class spreads its mass evenly.
struct FamilyModel {
  std::vector<Component> comps;
  std::vector<int> cls;
  std::vector<double> value;  // log2 V per component at tau
  int cls_size[5] = {2, 1, 3, 3, 6};

  FamilyModel(int q, double tau) {
    GlobalParams gp = level2_nonrot_params(q, tau, Level2Family{0.1, 0.1, 0.1, 0.1, 0.1});
    for (const auto& [c, p] : gp.alpha.mass) {
      comps.push_back(c);
      value.push_back(gp.values.at(c).log2_value);
      const int z = c.zero_count();
      const int mx = std::max({c.i, c.j, c.k});
      int k;
      if (z == 0) k = 2;
      else if (z == 2) k = 3;
      else if (mx == 3) k = 4;
      else if (c.k == 0) k = 1;
      else k = 0;
      cls.push_back(k);
    }
  }

  std::vector<double> alpha(const std::vector<double>& u) const {
    std::vector<double> a(comps.size());
    for (size_t t = 0; t < comps.size(); ++t) a[t] = u[cls[t]] / cls_size[cls[t]];
    return a;
  }

  static Level2Family family(const std::vector<double>& u) {
    return Level2Family{u[0] / 2.0, u[1], u[2] / 3.0, u[3] / 3.0, u[4] / 6.0};
  }

  MinPlusTerms terms(const std::vector<double>& u, double log2_phat_ref) const {
    const auto a = alpha(u);
    std::vector<double> mx(5, 0.0), mz(5, 0.0);
    for (size_t t = 0; t < comps.size(); ++t) {
      mx[comps[t].i] += a[t];
      mz[comps[t].k] += a[t];
    }
    MinPlusTerms r;
    r.f1 = entropy_of(mx);
    r.f2 = entropy_of(mz) - log2_phat_ref;
    r.d1.assign(5, 0.0);
    r.d2.assign(5, 0.0);
    r.dg.assign(5, 0.0);
    for (size_t t = 0; t < comps.size(); ++t) {
      const double w = 1.0 / cls_size[cls[t]];
      r.g += a[t] * value[t];
      r.d1[cls[t]] += w * dentropy(mx[comps[t].i]);
      r.d2[cls[t]] += w * dentropy(mz[comps[t].k]);
      r.dg[cls[t]] += w * value[t];
    }
    return r;
  }
};

}  // namespace

ParamFile level2_family_param_file(int q, const Level2Family& f) {
  ParamFile pf;
  pf.q = q;
  pf.level = 2;
  pf.mode = Mode::Level2Nonrot;
  pf.hashing = HashingMode::Asymmetric;
  pf.family = f;
  pf.alpha = level2_family_alpha(f);
  return pf;
}

Level2Opt optimize_level2(int q, double tau, int t_max, const AscentOptions& opt) {
  if (t_max < 0) throw Error(ErrorKind::ValidationError, "t_max must be non-negative");
  const FamilyModel model(q, tau);
  const Blocks blocks{{0, 5}};
  Level2Opt out;
  out.q = q;
  out.tau = tau;

  auto solve = [&](double pref, const std::vector<double>& start) {
    return maximize_min_plus([&](const std::vector<double>& u) { return model.terms(u, pref); }, start,
                             blocks, opt);
  };
  auto evaluate = [&](const std::vector<double>& u) {
    return evaluate_level2_nonrot(level2_nonrot_params(q, tau, FamilyModel::family(u)));
  };

  // Asymmetric hashing needs H(alpha_X) >= H(alpha_Z), which in this
  // family is a >= b. The solve does not see it; a violating iterate is
  // moved to a = b, where the two marginals coincide.
  auto project = [](std::vector<double> x) {
    if (x[0] / 2.0 < x[1]) {
      const double m = (x[0] + x[1]) / 3.0;
      x[0] = 2.0 * m;
      x[1] = m;
    }
    return x;
  };

  std::vector<double> u(5, 0.2);
  double pref = 0.0;
  VerifyReport rep;
  for (int t = 0; t <= t_max; ++t) {
    AscentResult r = solve(pref, u);
    u = project(r.x);
    rep = evaluate(u);
    out.history.push_back(Level2Iterate{t, pref, FamilyModel::family(u), r.value, rep.log2_bound,
                                        rep.constraint_ok});
    pref = rep.log2_phat;
  }

  // The final solve balances a_x against a_z / p_hat* with p_hat* one
  // iterate stale; a small extra margin restores the hard constraint.
  double delta = 0.0;
  if (!rep.constraint_ok) {
    delta = 1e-12;
    bool ok = false;
    for (int tries = 0; tries < 60 && !ok; ++tries, delta *= 2.0) {
      const std::vector<double> x = project(solve(pref + delta, u).x);
      VerifyReport cand = evaluate(x);
      if (cand.constraint_ok) {
        u = x;
        rep = cand;
        ok = true;
        break;
      }
    }
    if (!ok) throw Error(ErrorKind::SolverFailure, "could not restore a_x <= a_z / p_hat");
  }
  out.perturbation = delta;
  out.family = FamilyModel::family(u);
  out.report = verify_level2_nonrot(level2_nonrot_params(q, tau, out.family));
  return out;
}

Level2Search optimize_level2_omega(int q, int t_max, double tau0, int rounds, const AscentOptions& opt) {
  if (rounds < 1) throw Error(ErrorKind::ValidationError, "rounds must be positive");
  Level2Search s;
  s.omega.omega_bound = std::numeric_limits<double>::infinity();
  double tau = tau0;
  for (int r = 0; r < rounds; ++r) {
    Level2Opt o = optimize_level2(q, tau, t_max, opt);
    Pipeline p(level2_family_param_file(q, o.family));
    OmegaResult om;
    try {
      om = p.omega();
      if (om.omega_bound < s.omega.omega_bound) {
        s.best = o;
        s.omega = om;
      }
    } catch (const ConstraintError&) {
      // Optimized for a tau far from tau*: only move tau.
      om = omega_from_value([&](double t) { return p.evaluate(t).log2_bound; }, q, 2);
    }
    s.omegas.push_back(om.omega_bound);
    if (std::abs(om.tau_star - tau) < 1e-10) break;
    tau = om.tau_star;
  }
  if (!std::isfinite(s.omega.omega_bound))
    throw Error(ErrorKind::SolverFailure, "no round produced a family meeting the constraint");
  return s;
}

// ---- component subproblem ----

namespace {

struct RegionLayout {
  Component P;
  std::vector<Component> parts;  // left parts c' with P - c' valid
  std::vector<double> pv;        // log2 V(c') + log2 V(P - c')
};

RegionLayout region_layout(const Component& c, int r, const std::map<Component, ValuePair>& lower) {
  RegionLayout L;
  L.P = region_component(c, r);
  for (const auto& cl : all_components(c.level - 1)) {
    Component cr{L.P.i - cl.i, L.P.j - cl.j, L.P.k - cl.k, c.level - 1};
    if (!cr.valid()) continue;
    auto il = lower.find(cl), ir = lower.find(cr);
    if (il == lower.end() || ir == lower.end())
      throw Error(ErrorKind::MissingLowerValue, "no lower value for a part of " + to_string(L.P));
    L.parts.push_back(cl);
    L.pv.push_back(il->second.log2_value + ir->second.log2_value);
  }
  return L;
}

void fill_lower(RegionParams& p, const std::map<Component, ValuePair>& lower) {
  for (int r = 0; r < 3; ++r) {
    const Component P = region_component(p.component, r);
    p.lower[r].clear();
    for (const auto& cl : all_components(p.component.level - 1)) {
      Component cr{P.i - cl.i, P.j - cl.j, P.k - cl.k, p.component.level - 1};
      if (!cr.valid()) continue;
      p.lower[r][cl] = lower.at(cl);
      p.lower[r][cr] = lower.at(cr);
    }
  }
}

// Scale start weights to the given marginals (KL projection).
JointDistribution project_to_marginals(const std::vector<Component>& parts, std::vector<double> w,
                                       const std::array<MarginalDistribution, 3>& m, int level) {
  const int n = level_total(level) + 1;
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double resid = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
      std::vector<double> cur(n, 0.0);
      for (size_t t = 0; t < parts.size(); ++t) cur[parts[t].at(ax)] += w[t];
      for (int v = 0; v < n; ++v) resid = std::max(resid, std::abs(cur[v] - m[ax].mass[v]));
      for (size_t t = 0; t < parts.size(); ++t) {
        const int v = parts[t].at(ax);
        w[t] = cur[v] > 0.0 ? w[t] * m[ax].mass[v] / cur[v] : 0.0;
      }
    }
    if (resid < 1e-14) break;
  }
  JointDistribution d{level, {}};
  double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (size_t t = 0; t < parts.size(); ++t)
    if (w[t] > 0.0) d.mass[parts[t]] = w[t] / s;
  return d;
}

struct RegionQuantities {
  double c1 = 0, c2 = 0, c3 = 0;  // n_hat + a_x - max, a_z - p_hat, v_hat
  std::vector<double> split;      // region's marginal on the output axis
  double R = 0, phat = 0;
};

RegionQuantities region_quantities(const RegionParams& p, int r, double tau) {
  RegionParams one = p;
  one.A = {0.0, 0.0, 0.0};
  one.A[r] = 1.0;
  ComponentReport rep = verify_component_report(one, tau);
  const RegionReport& rr = rep.regions[r];
  RegionQuantities q;
  q.c1 = rr.log2_nhat + (rr.log2_ax + rr.log2_ay) / 2.0 - rr.log2_max;
  q.c2 = rr.log2_az - rr.log2_phat;
  q.c3 = rr.log2_vhat;
  q.R = rr.log2_nhat - rr.log2_max;
  q.phat = rr.log2_phat;
  auto m = marginals(p.alpha[r].pruned());
  q.split = m[2 - r].mass;
  return q;
}

}  // namespace

double component_objective(const RegionParams& p, const SubproblemObjective& obj, double tau) {
  ValuePair v = verify_component(p, tau);
  double s = obj.weight_logv * v.log2_value;
  for (const auto& [kl, w] : obj.split_weights) s += w * v.z_split(kl);
  return s;
}

RegionParams default_region_params(const Component& c, int q,
                                   const std::map<Component, ValuePair>& lower) {
  if (c.has_zero()) throw Error(ErrorKind::ZeroComponent, to_string(c) + " contains a zero");
  RegionParams p;
  p.q = q;
  p.component = c;
  p.A = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (int r = 0; r < 3; ++r) {
    RegionLayout L = region_layout(c, r, lower);
    const double mx = *std::max_element(L.pv.begin(), L.pv.end());
    double s = 0.0;
    std::vector<double> w(L.pv.size());
    for (size_t t = 0; t < w.size(); ++t) s += (w[t] = std::exp2(L.pv[t] - mx));
    p.alpha[r] = JointDistribution{c.level - 1, {}};
    for (size_t t = 0; t < w.size(); ++t) p.alpha[r].mass[L.parts[t]] = w[t] / s;
  }
  fill_lower(p, lower);
  return p;
}

ComponentOpt optimize_component(const Component& c, const SubproblemObjective& obj,
                                const std::map<Component, ValuePair>& lower, double tau, int q,
                                const ComponentOptOptions& opt, const std::optional<RegionParams>& start) {
  if (!c.valid()) throw Error(ErrorKind::InvalidComponent, to_string(c));
  if (c.has_zero()) throw Error(ErrorKind::ZeroComponent, to_string(c) + " contains a zero");
  if (obj.weight_logv < 0.0) throw Error(ErrorKind::ValidationError, "weight on log V must be >= 0");
  ComponentOpt out;
  out.params = start ? *start : default_region_params(c, q, lower);
  out.params.q = q;
  out.params.component = c;
  fill_lower(out.params, lower);
  out.objective = component_objective(out.params, obj, tau);
  const int n = level_total(c.level) + 1;
  std::vector<double> wsplit(n, 0.0);
  for (const auto& [kl, w] : obj.split_weights)
    if (kl >= 0 && kl < n) wsplit[kl] = w;
  const double wv = obj.weight_logv;

  auto try_accept = [&](const RegionParams& cand) {
    double v;
    try {
      v = component_objective(cand, obj, tau);
    } catch (const Error&) {
      return false;
    }
    if (v > out.objective + 1e-13) {
      out.params = cand;
      out.objective = v;
      return true;
    }
    return false;
  };

  std::array<RegionLayout, 3> layout;
  for (int r = 0; r < 3; ++r) layout[r] = region_layout(c, r, lower);

  for (int it = 0; it < opt.outer_iters; ++it) {
    // (a) A step: min of two linear forms plus a linear form.
    {
      std::array<RegionQuantities, 3> rq;
      for (int r = 0; r < 3; ++r) rq[r] = region_quantities(out.params, r, tau);
      auto lp = [&](const std::array<double, 3>& A) {
        double l1 = 0, l2 = 0, l3 = 0, sp = 0;
        for (int r = 0; r < 3; ++r) {
          l1 += A[r] * rq[r].c1;
          l2 += A[r] * rq[r].c2;
          l3 += A[r] * rq[r].c3;
          for (size_t kl = 0; kl < rq[r].split.size(); ++kl) sp += A[r] * wsplit[kl] * rq[r].split[kl];
        }
        return wv * (std::min(l1, l2) + l3) + sp;
      };
      std::vector<std::array<double, 3>> cands = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
      for (int r = 0; r < 3; ++r)
        for (int s = r + 1; s < 3; ++s) {
          const double dr = rq[r].c1 - rq[r].c2, ds = rq[s].c1 - rq[s].c2;
          if (dr * ds < 0.0) {
            const double t = ds / (ds - dr);
            std::array<double, 3> A{0, 0, 0};
            A[r] = t;
            A[s] = 1.0 - t;
            cands.push_back(A);
          }
        }
      std::array<double, 3> bestA = out.params.A;
      double bestv = lp(bestA);
      for (const auto& A : cands) {
        const double v = lp(A);
        if (v > bestv + 1e-12) {
          bestv = v;
          bestA = A;
        }
      }
      if (bestA != out.params.A) {
        RegionParams cand = out.params;
        cand.A = bestA;
        try_accept(cand);
      }
    }

    // (b) alpha step with R and p_hat frozen at the current iterate.
    {
      std::array<RegionQuantities, 3> rq;
      double Rold = 0.0;
      for (int r = 0; r < 3; ++r) {
        if (out.params.A[r] <= 0.0) continue;
        rq[r] = region_quantities(out.params, r, tau);
        Rold += out.params.A[r] * rq[r].R;
      }
      Blocks blocks;
      std::vector<int> region_of;
      std::vector<double> x;
      for (int r = 0; r < 3; ++r) {
        if (out.params.A[r] <= 0.0) continue;
        const int b = static_cast<int>(x.size());
        for (const auto& cl : layout[r].parts) {
          x.push_back(out.params.alpha[r](cl) + 1e-9);
          region_of.push_back(r);
        }
        blocks.push_back({b, static_cast<int>(x.size())});
      }
      const auto A = out.params.A;
      MinPlusFn terms = [&](const std::vector<double>& y) {
        MinPlusTerms t;
        t.d1.assign(y.size(), 0.0);
        t.d2.assign(y.size(), 0.0);
        t.dg.assign(y.size(), 0.0);
        t.f1 = Rold;
        for (auto [b, e] : blocks) {
          const int r = region_of[b];
          const auto& parts = layout[r].parts;
          std::vector<double> mx(n / 2 + 1, 0.0), my(n / 2 + 1, 0.0), mz(n / 2 + 1, 0.0);
          for (int i = b; i < e; ++i) {
            mx[parts[i - b].i] += y[i];
            my[parts[i - b].j] += y[i];
            mz[parts[i - b].k] += y[i];
          }
          t.f1 += A[r] * (entropy_of(mx) + entropy_of(my)) / 2.0;
          t.f2 += A[r] * (entropy_of(mz) - rq[r].phat);
          for (int i = b; i < e; ++i) {
            const Component& cl = parts[i - b];
            t.g += A[r] * y[i] * layout[r].pv[i - b];
            t.dg[i] = A[r] * layout[r].pv[i - b];
            t.d1[i] = A[r] * (dentropy(mx[cl.i]) + dentropy(my[cl.j])) / 2.0;
            t.d2[i] = A[r] * dentropy(mz[cl.k]);
          }
        }
        for (int i = 0; i < static_cast<int>(y.size()); ++i) {
          t.d1[i] *= wv;
          t.d2[i] *= wv;
          t.dg[i] *= wv;
        }
        t.f1 *= wv;
        t.f2 *= wv;
        t.g *= wv;
        // Split terms: region r contributes A_r times its marginal on axis 2 - r.
        for (auto [b, e] : blocks) {
          const int r = region_of[b];
          const int axis = 2 - r;
          for (int i = b; i < e; ++i) {
            const int kl = layout[r].parts[i - b].at(axis);
            t.g += A[r] * wsplit[kl] * y[i];
            t.dg[i] += A[r] * wsplit[kl];
          }
        }
        return t;
      };
      if (!x.empty()) {
        AscentResult res = maximize_min_plus(terms, x, blocks, opt.ascent);
        RegionParams cand = out.params;
        for (auto [b, e] : blocks) {
          const int r = region_of[b];
          cand.alpha[r] = JointDistribution{c.level - 1, {}};
          for (int i = b; i < e; ++i)
            if (res.x[i] > 1e-15) cand.alpha[r].mass[layout[r].parts[i - b]] = res.x[i];
          double s = cand.alpha[r].total();
          for (auto& [cl, pm] : cand.alpha[r].mass) pm /= s;
        }
        try_accept(cand);
      }
    }

    // (c) Refinement with marginals fixed: (2/3) H(alpha) + alpha . pv is
    // maximized by tilting toward 2^{1.5 pv} and rescaling to the marginals.
    if (opt.refine) {
      RegionParams cand = out.params;
      for (int r = 0; r < 3; ++r) {
        if (cand.A[r] <= 0.0) continue;
        auto m = marginals(cand.alpha[r]);
        const auto& L = layout[r];
        const double mx = *std::max_element(L.pv.begin(), L.pv.end());
        std::vector<double> w(L.parts.size());
        for (size_t t = 0; t < w.size(); ++t) w[t] = std::exp2(1.5 * (L.pv[t] - mx));
        cand.alpha[r] = project_to_marginals(L.parts, w, m, c.level - 1);
      }
      try_accept(cand);
    }
    out.history.push_back(out.objective);
  }
  out.value = verify_component(out.params, tau);
  return out;
}

// ---- framework ----

namespace {

double pipeline_bound(const ParamFile& pf, double tau) {
  Pipeline p(pf);
  return p.evaluate(tau).log2_bound;
}

bool one_zero_with_k(const Component& c) { return c.zero_count() == 1 && c.k > 0; }

void set_recipe(ParamFile& pf, ValueRecipe r) {
  for (auto& x : pf.values)
    if (x.component == r.component && x.id == r.id) {
      x = std::move(r);
      return;
    }
  pf.values.push_back(std::move(r));
}

ValueRecipe* find_recipe(ParamFile& pf, const Component& c) {
  for (auto& x : pf.values)
    if (x.component == c && x.id == "main") return &x;
  return nullptr;
}

// Optimal-split recipes for zero-containing components of one level.
void add_merging_recipes(ParamFile& pf, int level, int q, double tau) {
  for (const auto& c : all_components(level)) {
    if (!c.has_zero()) continue;
    ValueRecipe r;
    r.component = c;
    if (one_zero_with_k(c)) {
      r.formula = Formula::RestrictedMerging;
      r.split = optimal_merging_split(c, q, tau);
    } else {
      r.formula = Formula::Merging;
    }
    set_recipe(pf, r);
  }
}

// Max entropy over joints with alpha's marginals, with the scaling
// potentials L: the maximizer is 2^{L_X(i) + L_Y(j) + L_Z(k)} / |S|.
struct MaxEntDual {
  double bits = 0.0;
  std::array<std::vector<double>, 3> L;
  std::array<std::vector<double>, 3> m;
};

MaxEntDual max_entropy_dual(const std::vector<Component>& comps, const std::vector<double>& a, int level) {
  const int n = level_total(level) + 1;
  MaxEntDual d;
  for (int ax = 0; ax < 3; ++ax) {
    d.m[ax].assign(n, 0.0);
    d.L[ax].assign(n, 0.0);
    for (size_t c = 0; c < comps.size(); ++c) d.m[ax][comps[c].at(ax)] += a[c];
  }
  std::vector<size_t> S;
  for (size_t c = 0; c < comps.size(); ++c) {
    bool ok = true;
    for (int ax = 0; ax < 3; ++ax) ok = ok && d.m[ax][comps[c].at(ax)] > 0.0;
    if (ok) S.push_back(c);
  }
  std::vector<double> w(comps.size(), 0.0);
  for (size_t c : S) w[c] = 1.0 / static_cast<double>(S.size());
  for (int sweep = 0; sweep < 20000; ++sweep) {
    double resid = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
      std::vector<double> cur(n, 0.0);
      for (size_t c : S) cur[comps[c].at(ax)] += w[c];
      for (int v = 0; v < n; ++v) {
        if (d.m[ax][v] <= 0.0) continue;
        resid = std::max(resid, std::abs(cur[v] - d.m[ax][v]));
        d.L[ax][v] += std::log2(d.m[ax][v] / cur[v]);
      }
      for (size_t c : S) {
        const int v = comps[c].at(ax);
        w[c] *= d.m[ax][v] / cur[v];
      }
    }
    if (resid < 1e-13) break;
  }
  d.bits = 0.0;
  for (size_t c : S) d.bits -= xlog2x(w[c]);
  return d;
}

// Global alpha step: f1 = n_hat + a_x - max with max linearized at the
// previous marginals (an upper estimate, since max is concave in them),
// f2 = a_z - p_hat (exact in alpha), g = v_hat.
struct GlobalModel {
  std::vector<Component> comps;
  std::vector<SplitDistribution> split;
  std::vector<double> logv;
  std::vector<bool> zero_xy;
  int n = 0;
  MaxEntDual dual;

  MinPlusTerms terms(const std::vector<double>& a) const {
    MinPlusTerms t;
    const size_t m = comps.size();
    t.d1.assign(m, 0.0);
    t.d2.assign(m, 0.0);
    t.dg.assign(m, 0.0);
    std::vector<double> mx(n, 0.0);
    std::map<std::pair<int, int>, double> gamma;
    std::map<int, double> wk;
    std::map<std::pair<int, int>, double> uk;
    for (size_t c = 0; c < m; ++c) {
      mx[comps[c].i] += a[c];
      for (const auto& [kl, s] : split[c].mass) {
        gamma[{kl, comps[c].k}] += a[c] * s;
        if (!zero_xy[c]) uk[{comps[c].k, kl}] += a[c] * s;
      }
      if (!zero_xy[c]) wk[comps[c].k] += a[c];
    }
    t.f1 = entropy_of(mx) - dual.bits;
    for (size_t c = 0; c < m; ++c) t.f1 -= xlog2x(a[c]);
    {
      std::array<std::vector<double>, 3> mm;
      for (int ax = 0; ax < 3; ++ax) mm[ax].assign(n, 0.0);
      for (size_t c = 0; c < m; ++c)
        for (int ax = 0; ax < 3; ++ax) mm[ax][comps[c].at(ax)] += a[c];
      for (int ax = 0; ax < 3; ++ax)
        for (int v = 0; v < n; ++v) t.f1 += dual.L[ax][v] * (mm[ax][v] - dual.m[ax][v]);
    }
    double hg = 0.0;
    for (const auto& [key, g] : gamma) hg -= xlog2x(g);
    t.f2 = hg;
    for (size_t c = 0; c < m; ++c) {
      const double hs = entropy(split[c]);
      if (zero_xy[c]) t.f2 -= a[c] * hs;
    }
    for (const auto& [k, w] : wk) {
      if (w <= 0.0) continue;
      double h = 0.0;
      for (const auto& [key, u] : uk)
        if (key.first == k && u > 0.0) h -= (u / w) * std::log2(u / w);
      t.f2 -= w * h;
    }
    for (size_t c = 0; c < m; ++c) {
      t.g += a[c] * logv[c];
      t.dg[c] = logv[c];
      t.d1[c] = dentropy(mx[comps[c].i]) + dentropy(a[c]);
      for (int ax = 0; ax < 3; ++ax) t.d1[c] += dual.L[ax][comps[c].at(ax)];
      double d = 0.0;
      for (const auto& [kl, s] : split[c].mass) d += s * dentropy(gamma.at({kl, comps[c].k}));
      if (zero_xy[c]) {
        d -= entropy(split[c]);
      } else {
        const double w = wk.at(comps[c].k);
        double dd = std::log2(std::max(w, kFloor));
        for (const auto& [kl, s] : split[c].mass)
          dd -= s * std::log2(std::max(uk.at({comps[c].k, kl}), kFloor));
        d -= dd;
      }
      t.d2[c] = d;
    }
    return t;
  }
};

struct Framework {
  int q;
  double tau;
  int L;
  ParamFile pf;
  double bound = -std::numeric_limits<double>::infinity();
  std::vector<double> history;
  std::vector<std::string> log;
  bool verbose = false;

  void note(const std::string& s) {
    log.push_back(s);
    if (verbose) std::fprintf(stderr, "[framework] %s\n", s.c_str());
  }

  bool accept(const ParamFile& cand, const std::string& what) {
    double b;
    try {
      b = pipeline_bound(cand, tau);
    } catch (const Error& e) {
      note(what + " rejected: " + e.what());
      return false;
    }
    if (b > bound + 1e-13) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s: %.12f -> %.12f", what.c_str(), bound, b);
      note(buf);
      pf = cand;
      bound = b;
      return true;
    }
    return false;
  }

  void global_step() {
    Pipeline p(pf);
    GlobalModel gm;
    gm.n = level_total(L) + 1;
    std::vector<double> x;
    for (const auto& c : all_components(L)) {
      ValuePair v = p.value(c, "main", tau);
      gm.comps.push_back(c);
      gm.split.push_back(v.z_split);
      gm.logv.push_back(v.log2_value);
      gm.zero_xy.push_back(c.i == 0 || c.j == 0);
      x.push_back(pf.alpha(c) + 1e-9);
    }
    // Hashing needs H(alpha_X) = H(alpha_Y): keep alpha invariant under the
    // X<->Y swap. Symmetric start plus orbit-averaged gradients stay symmetric.
    std::vector<size_t> partner(gm.comps.size());
    for (size_t c = 0; c < gm.comps.size(); ++c) {
      const Component& a = gm.comps[c];
      const Component sw{a.j, a.i, a.k, a.level};
      partner[c] = static_cast<size_t>(
          std::find(gm.comps.begin(), gm.comps.end(), sw) - gm.comps.begin());
    }
    {
      std::vector<double> y(x.size());
      for (size_t c = 0; c < x.size(); ++c) y[c] = 0.5 * (x[c] + x[partner[c]]);
      x = y;
    }
    const double xs = std::accumulate(x.begin(), x.end(), 0.0);
    for (double& v : x) v /= xs;
    gm.dual = max_entropy_dual(gm.comps, x, L);
    auto symmetric_terms = [&](const std::vector<double>& a) {
      MinPlusTerms t = gm.terms(a);
      for (auto* d : {&t.d1, &t.d2, &t.dg}) {
        std::vector<double> e(d->size());
        for (size_t c = 0; c < e.size(); ++c) e[c] = 0.5 * ((*d)[c] + (*d)[partner[c]]);
        *d = std::move(e);
      }
      return t;
    };
    AscentOptions ao;
    ao.max_iters = 800;
    AscentResult r = maximize_min_plus(symmetric_terms, x, Blocks{{0, static_cast<int>(x.size())}}, ao);
    for (size_t c = 0; c < r.x.size(); ++c)
      if (partner[c] > c) r.x[c] = r.x[partner[c]] = 0.5 * (r.x[c] + r.x[partner[c]]);
    ParamFile cand = pf;
    cand.alpha = JointDistribution{L, {}};
    for (size_t c = 0; c < gm.comps.size(); ++c)
      if (r.x[c] > 1e-12) cand.alpha.mass[gm.comps[c]] = r.x[c];
    const double s = cand.alpha.total();
    for (auto& [c, m] : cand.alpha.mass) m /= s;
    if (!std::isfinite(bound)) {
      pf = cand;
      bound = pipeline_bound(pf, tau);
      note("initial global solve");
    } else {
      accept(cand, "global alpha");
    }
  }

  // d softmin / d split_c(kl), shifted by a constant (irrelevant on the simplex).
  std::map<int, double> split_gradient(const Component& c) {
    Pipeline p(pf);
    GlobalParams gp = p.global_params(tau);
    VerifyReport base = verify_global(gp);
    std::map<int, double> g;
    const SplitDistribution s0 = gp.splits.at(c);
    const double h = 1e-6;
    for (int kl = s0.lo(); kl <= s0.hi(); ++kl) {
      if (s0(kl) <= 0.0) continue;
      auto with = [&](double step) {
        SplitDistribution s = s0;
        s.mass[kl] += step;
        for (auto& [k2, m] : s.mass) m /= (1.0 + step);
        SplitMap sm = gp.splits;
        sm[c] = s;
        return softmin_bound(base.left, base.log2_az - phat_global(gp.alpha, sm));
      };
      const double st = std::min(h, s0(kl) / 2.0);
      g[kl] = (with(st) - with(-st)) / (2.0 * st);
    }
    return g;
  }

  void component_step() {
    Pipeline p(pf);
    std::map<Component, ValuePair> lower;
    if (L >= 2)
      for (const auto& c : all_components(L - 1)) lower[c] = p.value(c, "main", tau);
    for (const auto& c : all_components(L)) {
      const double w = pf.alpha(c);
      if (w <= 1e-12) continue;
      ValueRecipe* cur = find_recipe(pf, c);
      if (!cur) continue;
      std::map<int, double> g;
      try {
        g = split_gradient(c);
      } catch (const Error& e) {
        note("gradient for " + to_string(c) + " failed: " + e.what());
        continue;
      }
      ValueRecipe r = *cur;
      if (r.formula == Formula::RestrictedMerging) {
        SplitDistribution s{c.level, c.k, {}};
        std::map<int, double> ex;
        double mx = -std::numeric_limits<double>::infinity();
        for (int kl = s.lo(); kl <= s.hi(); ++kl) {
          double pw;
          try {
            pw = restricted_merging_value(c, SplitDistribution::point(c.level, c.k, kl), q, tau).log2_value;
          } catch (const Error&) {
            continue;
          }
          const double gk = g.count(kl) ? g[kl] : 0.0;
          ex[kl] = (w * pw + gk) / (w * tau);
          mx = std::max(mx, ex[kl]);
        }
        double z = 0.0;
        for (auto& [kl, e] : ex) z += std::exp2(e - mx);
        for (auto& [kl, e] : ex) s.mass[kl] = std::exp2(e - mx) / z;
        r.split = s;
      } else if (r.formula == Formula::Sym3_112) {
        auto f = [&](double b) {
          ValuePair v = level2_112_value(q, tau, b);
          double o = w * v.log2_value;
          for (const auto& [kl, gk] : g) o += gk * v.z_split(kl);
          return o;
        };
        double lo = 1e-12, hi = 0.5 - 1e-12;
        const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
          const double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
          if (f(x1) < f(x2))
            lo = x1;
          else
            hi = x2;
        }
        r.b = 0.5 * (lo + hi);
      } else if (r.formula == Formula::Component) {
        SubproblemObjective obj;
        obj.weight_logv = w;
        for (const auto& [kl, gk] : g) obj.split_weights[kl] = gk;
        obj.provenance = "softmin gradient";
        RegionParams start;
        start.q = q;
        start.component = c;
        start.A = r.A;
        start.alpha = r.regions;
        ComponentOptOptions co;
        co.outer_iters = 2;
        co.ascent.max_iters = 300;
        ComponentOpt res = optimize_component(c, obj, lower, tau, q, co, start);
        r.A = res.params.A;
        r.regions = res.params.alpha;
      } else {
        continue;
      }
      ParamFile cand = pf;
      set_recipe(cand, r);
      accept(cand, "component " + to_string(c));
    }
  }
};

}  // namespace

PipelineState run_framework(int q, double tau, int max_level, const FrameworkOptions& opt) {
  if (max_level < 1 || max_level > 3) throw Error(ErrorKind::ValidationError, "max level must be 1, 2 or 3");
  if (q < 2) throw Error(ErrorKind::ValidationError, "q must be at least 2");
  if (!(tau >= 2.0 / 3.0 && tau <= 1.0)) throw Error(ErrorKind::OutOfRange, "tau outside [2/3, 1]");
  PipelineState st;
  st.q = q;
  st.max_level = max_level;
  st.tau = tau;

  if (max_level == 1) {
    for (int round = 0; round < std::max(1, opt.tau_rounds); ++round) {
      Level1Opt o = optimize_level1(q, st.tau);
      st.params = level1_param_file(q, o.b);
      st.log2_bound = Pipeline(st.params).evaluate(st.tau).log2_bound;
      st.history.push_back(st.log2_bound);
      st.omega = Pipeline(st.params).omega();
      char buf[96];
      std::snprintf(buf, sizeof buf, "level 1: b = %.12f, omega <= %.9f", o.b, st.omega.omega_bound);
      st.log.push_back(buf);
      st.tau = st.omega.tau_star;
    }
    return st;
  }

  Framework fw{q, tau, max_level, ParamFile{}, -std::numeric_limits<double>::infinity(), {}, {}, false};
  fw.verbose = opt.verbose;
  fw.pf.q = q;
  fw.pf.level = max_level;
  fw.pf.mode = Mode::Global;
  fw.pf.hashing = HashingMode::Asymmetric;

  // Initial solution: every component maximizes its own value.
  add_merging_recipes(fw.pf, 2, q, tau);
  {
    ValueRecipe r;
    r.component = Component{1, 1, 2, 2};
    r.formula = Formula::Sym3_112;
    r.b = level2_112_optimal_b(q, tau);
    set_recipe(fw.pf, r);
  }
  if (max_level == 3) {
    add_merging_recipes(fw.pf, 3, q, tau);
    Pipeline p(fw.pf);
    std::map<Component, ValuePair> lower;
    for (const auto& c : all_components(2)) lower[c] = p.value(c, "main", tau);
    for (const auto& c : all_components(3)) {
      if (c.has_zero()) continue;
      ComponentOptOptions co;
      co.outer_iters = 2;
      co.ascent.max_iters = 300;
      ComponentOpt res = optimize_component(c, SubproblemObjective{}, lower, tau, q, co);
      ValueRecipe r;
      r.component = c;
      r.formula = Formula::Component;
      r.A = res.params.A;
      r.regions = res.params.alpha;
      set_recipe(fw.pf, r);
    }
    fw.note("level-3 components initialized");
  }
  fw.pf.alpha = JointDistribution{max_level, {}};
  for (const auto& c : all_components(max_level)) fw.pf.alpha.mass[c] = 1.0;
  for (auto& [c, m] : fw.pf.alpha.mass) m /= static_cast<double>(fw.pf.alpha.mass.size());
  fw.global_step();
  fw.history.push_back(fw.bound);

  st.omega.omega_bound = 3.0;
  for (int round = 0; round < std::max(1, opt.tau_rounds); ++round) {
    if (round > 0) {
      fw.bound = pipeline_bound(fw.pf, fw.tau);
      fw.history.push_back(fw.bound);
    }
    for (int it = 0; it < opt.iterations; ++it) {
      const double before = fw.bound;
      fw.global_step();
      fw.component_step();
      fw.global_step();
      fw.history.push_back(fw.bound);
      if (fw.bound - before < 1e-10) break;
    }
    OmegaResult om = Pipeline(fw.pf).omega();
    char buf[96];
    std::snprintf(buf, sizeof buf, "round %d: omega <= %.9f", round, om.omega_bound);
    fw.note(buf);
    if (om.omega_bound < st.omega.omega_bound) {
      st.omega = om;
      st.params = fw.pf;
      st.tau = fw.tau;
      st.log2_bound = fw.bound;
    }
    fw.tau = om.tau_star;
  }
  st.history = fw.history;
  st.log = fw.log;
  st.params.tau = st.tau;
  return st;
}

}  // namespace cwl
