#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "rdcc/errors.hpp"

namespace rdcc {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  bool ok = true;
};

// Central-difference verification of an analytic gradient. For every entry
// of `values`, evaluates f at value +/- h and compares (f+ - f-) / 2h
// against `analytic` with relative error |a - n| / max(|a|, |n|, 1e-8).
// `f` must be a deterministic scalar function of `values`.
inline GradCheckResult grad_check(const std::function<double()>& f,
                                  std::span<double> values,
                                  std::span<const double> analytic, double h,
                                  double tol) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
  if (values.size() != analytic.size())
    throw std::invalid_argument("grad_check: gradient size mismatch");
  GradCheckResult r;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double fp = f();
    values[i] = saved - h;
    const double fm = f();
    values[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite function value at index " +
                         std::to_string(i));
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst_index = i;
    }
  }
  r.ok = r.max_rel_err <= tol;
  return r;
}

}  // namespace rdcc
