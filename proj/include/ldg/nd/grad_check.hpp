#pragma once

#include <functional>
#include <vector>

#include "ldg/nd/tensor.hpp"

namespace ldg::nd {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;  // number of coordinates compared
};

/// Compares the analytic gradient of `f` at `point` with central differences.
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double h);

/// Same check against the current values of `params` (leaves that `f` reads).
/// The parameters are perturbed in place and restored. When `max_coords_per_param`
/// is nonzero, only that many evenly spaced coordinates of each tensor are probed.
GradCheckResult finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double h,
                                  std::size_t max_coords_per_param = 0);

}  // namespace ldg::nd
