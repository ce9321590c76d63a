#include "ldg/nd/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ldg::nd {

namespace {

double eval_scalar(const std::function<Tensor()>& f) {
    NoGradGuard guard;
    const Tensor out = f();
    const double v = out.item();
    if (!std::isfinite(v)) throw NonFiniteError("finite_diff_check: non-finite function value");
    return v;
}

}  // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double h) {
    Tensor x = Tensor::from(point.shape(), std::vector<double>(point.values().begin(), point.values().end()), true);
    return finite_diff_check([&] { return f(x); }, {x}, h).max_rel_error;
}

GradCheckResult finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params, double h,
                                  std::size_t max_coords_per_param) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    for (auto& p : params) p.zero_grad();
    const Tensor loss = f();
    backward(loss);

    GradCheckResult result;
    for (auto& p : params) {
        const std::vector<double> analytic =
            p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end()) : std::vector<double>(p.numel(), 0.0);
        const std::size_t n = p.numel();
        const std::size_t probes = max_coords_per_param == 0 ? n : std::min(n, max_coords_per_param);
        auto vals = p.mutable_values();
        for (std::size_t t = 0; t < probes; ++t) {
            const std::size_t i = probes == n ? t : (t * n) / probes;
            const double saved = vals[i];
            vals[i] = saved + h;
            const double up = eval_scalar(f);
            vals[i] = saved - h;
            const double down = eval_scalar(f);
            vals[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
            result.max_rel_error = std::max(result.max_rel_error, err);
            ++result.coordinates;
        }
    }
    for (auto& p : params) p.zero_grad();
    return result;
}

}  // namespace ldg::nd
