#include "ldg/model/params.hpp"

#include <cmath>

namespace ldg::model {

namespace {

std::size_t volume(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

Tensor uniform_init(Shape shape, double bound, Rng& rng) {
    std::vector<double> v(volume(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

std::size_t count_values(const ParamList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    return uniform_init(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    return uniform_init(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

Tensor normal_init(Shape shape, double stddev, Rng& rng) {
    std::vector<double> v(volume(shape));
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace ldg::model
