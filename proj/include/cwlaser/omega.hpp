#pragma once

#include <functional>

namespace cwl {

struct OmegaResult {
  double tau_star = 1.0;
  double omega_bound = 3.0;
  int q = 0;
  int power = 1;
  double log2_value = 0.0;   // value_fn(tau_star)
  double log2_target = 0.0;  // power * log2(q + 2)
  int probes = 0;
};

using ValueFn = std::function<double(double)>;

// Smallest tau in [2/3, 1] with value_fn(tau) >= power * log2(q + 2), by
// bisection to `tol`; omega <= 3 tau.
OmegaResult omega_from_value(const ValueFn& value_fn, int q, int power, double tol = 1e-9);

// One-shot check: value_fn(tau) > log2((q + 2)^power + extra).
bool value_exceeds_rank(const ValueFn& value_fn, double tau, int q, int power, double extra = 0.0);

}  // namespace cwl
