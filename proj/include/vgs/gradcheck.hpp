#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vgs/param_store.hpp"

namespace vgs {

struct FdParamReport {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct FdReport {
  double step = 0.0;
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  std::vector<FdParamReport> params;

  bool pass() const { return max_rel_err <= tolerance; }
  std::string worst_summary() const;
};

// Central-difference check of the analytic gradient of `loss_fn` against
// every element of every parameter in `params`. `loss_fn` must rebuild the
// forward graph from the current parameter values on each call and must be
// deterministic; the checker probes this by evaluating the loss twice and
// refuses to run if the values differ. Relative error per element is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
FdReport finite_difference_check(const std::function<Tensor()>& loss_fn, ParamStore& params,
                                 double step, double tolerance);

}  // namespace vgs
