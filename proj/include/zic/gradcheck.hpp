#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "zic/daezic.hpp"

namespace zic {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  Eigen::Index worst_index = 0;
};

/// Compares analytic gradients of L1 + L2 against central differences for
/// every trainable scalar. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult check_gradients(DaeZicModel& model, const Link& link, const Batch& batch, double step = 1e-5,
                                       double floor = 1e-7) {
  forward_backward(model, link, batch, true);
  const auto params = model.params();
  GradCheckResult r;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = *params[t];
    const Tensor2 analytic = p.grad;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& w = p.value.data()[i];
      const double saved = w;
      w = saved + step;
      const double up = forward_backward(model, link, batch, false).total();
      w = saved - step;
      const double down = forward_backward(model, link, batch, false).total();
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_tensor = t;
        r.worst_index = i;
      }
      ++r.checked;
    }
  }
  return r;
}

}  // namespace zic
