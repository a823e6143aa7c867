#include "cwlaser/omega.hpp"

#include <cmath>

#include "cwlaser/error.hpp"

namespace cwl {

OmegaResult omega_from_value(const ValueFn& value_fn, int q, int power, double tol) {
  if (q < 1 || power < 1) throw Error(ErrorKind::ValidationError, "q and power must be positive");
  OmegaResult r;
  r.q = q;
  r.power = power;
  r.log2_target = power * std::log2(q + 2.0);
  double lo = 2.0 / 3.0, hi = 1.0;
  const double vhi = value_fn(hi);
  r.probes = 1;
  if (!(vhi >= r.log2_target))
    throw Error(ErrorKind::NoFeasibleTau,
                "value at tau = 1 is below log2 (q+2)^m; the parameters are broken");
  double vlo = value_fn(lo);
  ++r.probes;
  if (vlo >= r.log2_target) {
    r.tau_star = lo;
    r.omega_bound = 3.0 * lo;
    r.log2_value = vlo;
    return r;
  }
  double vbest = vhi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double v = value_fn(mid);
    ++r.probes;
    if (v >= r.log2_target) {
      hi = mid;
      vbest = v;
    } else {
      lo = mid;
    }
  }
  r.tau_star = hi;
  r.omega_bound = 3.0 * hi;
  r.log2_value = vbest;
  return r;
}

bool value_exceeds_rank(const ValueFn& value_fn, double tau, int q, int power, double extra) {
  const double target = std::log2(std::pow(q + 2.0, power) + extra);
  return value_fn(tau) > target;
}

}  // namespace cwl
