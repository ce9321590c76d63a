#pragma once

#include <span>
#include <vector>

#include "ldg/model/params.hpp"

namespace ldg::train {

struct AdamOptions {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
};

struct AdamSlot {
    std::vector<double> m, v;
    std::size_t step = 0;
};

/// One Adam step on a single tensor's values, with the L2 term wd*w added to the gradient.
void adam_update(std::span<double> w, std::span<const double> g, AdamSlot& slot, const AdamOptions& opt);

/// Adam over a parameter list. Parameters that received no gradient in the
/// current step are left untouched, moments and step counter included.
class Adam {
public:
    Adam(model::ParamList params, AdamOptions options);

    void step();
    void zero_grad();

    const AdamOptions& options() const noexcept { return options_; }
    const std::vector<AdamSlot>& slots() const noexcept { return slots_; }

private:
    model::ParamList params_;
    AdamOptions options_;
    std::vector<AdamSlot> slots_;
};

}  // namespace ldg::train
