#include "vgs/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace vgs {

std::string FdReport::worst_summary() const {
  const FdParamReport* worst = nullptr;
  for (const auto& p : params)
    if (!worst || p.max_rel_err > worst->max_rel_err) worst = &p;
  if (!worst) return "no parameters checked";
  return worst->name + "[" + std::to_string(worst->worst_index) +
         "]: analytic=" + format_double(worst->analytic) +
         " numeric=" + format_double(worst->numeric) +
         " rel_err=" + format_double(worst->max_rel_err);
}

FdReport finite_difference_check(const std::function<Tensor()>& loss_fn, ParamStore& params,
                                 double step, double tolerance) {
  if (step <= 0) throw std::invalid_argument("finite_difference_check: step must be positive");
  if (tolerance <= 0) throw std::invalid_argument("finite_difference_check: tolerance must be positive");

  Tensor loss = loss_fn();
  if (loss.size() != 1)
    throw std::runtime_error("finite_difference_check: loss must be scalar");
  auto analytic = reverse_accumulate(loss, params);

  auto eval = [&]() -> double {
    NoGradGuard guard;
    return loss_fn().value();
  };
  double probe1 = eval();
  double probe2 = eval();
  if (probe1 != probe2)
    throw std::runtime_error("finite_difference_check: loss is not deterministic across evaluations");

  FdReport report;
  report.step = step;
  report.tolerance = tolerance;
  for (auto& [name, t] : params) {
    FdParamReport pr;
    pr.name = name;
    const std::vector<double>& ga = analytic.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) {
      double saved = (*t.data)[i];
      (*t.data)[i] = saved + step;
      double up = eval();
      (*t.data)[i] = saved - step;
      double down = eval();
      (*t.data)[i] = saved;
      double numeric = (up - down) / (2.0 * step);
      double rel = std::fabs(ga[i] - numeric) /
                   std::max({std::fabs(ga[i]), std::fabs(numeric), 1e-8});
      if (rel >= pr.max_rel_err) {
        pr.max_rel_err = rel;
        pr.worst_index = i;
        pr.analytic = ga[i];
        pr.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, pr.max_rel_err);
    report.params.push_back(std::move(pr));
  }
  return report;
}

}  // namespace vgs
