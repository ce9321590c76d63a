#include "ldg/train/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ldg::train {

void adam_update(std::span<double> w, std::span<const double> g, AdamSlot& slot, const AdamOptions& opt) {
    if (w.size() != g.size()) throw std::invalid_argument("adam: gradient and parameter sizes differ");
    if (slot.m.empty()) {
        slot.m.assign(w.size(), 0.0);
        slot.v.assign(w.size(), 0.0);
    }
    if (slot.m.size() != w.size()) throw std::invalid_argument("adam: moment buffers do not match the parameter");
    ++slot.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(slot.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(slot.step));
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i] + opt.weight_decay * w[i];
        slot.m[i] = opt.beta1 * slot.m[i] + (1.0 - opt.beta1) * gi;
        slot.v[i] = opt.beta2 * slot.v[i] + (1.0 - opt.beta2) * gi * gi;
        const double mhat = slot.m[i] / c1;
        const double vhat = slot.v[i] / c2;
        w[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon);
    }
}

Adam::Adam(model::ParamList params, AdamOptions options)
    : params_(std::move(params)), options_(options), slots_(params_.size()) {}

void Adam::step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& t = params_[k].tensor;
        if (!t.has_grad()) continue;
        adam_update(t.mutable_values(), t.grad(), slots_[k], options_);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace ldg::train
