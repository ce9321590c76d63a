#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ldg/nd/tensor.hpp"
#include "ldg/util/rng.hpp"

namespace ldg::model {

using nd::Shape;
using nd::Tensor;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::size_t count_values(const ParamList& params);

/// Uniform in +-sqrt(6 / fan_in): He initialization for relu layers.
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);
/// Uniform in +-1/sqrt(fan_in).
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);
Tensor normal_init(Shape shape, double stddev, Rng& rng);

}  // namespace ldg::model
