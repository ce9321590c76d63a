#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace ldg::train {

enum class Variant { full, cls, coarse, fine };

std::string to_string(Variant v);
/// Accepts "full", "cls", "coarse", "fine".
Variant parse_variant(const std::string& name);

struct TrainConfig {
    double learning_rate = 1e-2;
    double lambda = 1.0;
    double alpha = 0.3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    std::size_t patch_size = 13;
    std::uint64_t seed = 0;
    Variant variant = Variant::full;
    bool augment = true;

    // Model and data plumbing.
    double val_fraction = 0.2;
    /// 0 means ceil(train pixels / batch_size).
    std::size_t steps_per_epoch = 0;
    std::array<std::size_t, 2> widths{8, 16};
    std::size_t d_sem = 64;
    std::size_t text_layers = 2;
    std::size_t text_width = 64;
    std::size_t text_heads = 4;
    std::size_t bpe_merges = 512;
    bool normalize = true;
    std::size_t eval_batch = 256;

    /// Throws std::invalid_argument when learning_rate <= 0, lambda < 0, alpha outside [0,1], etc.
    void validate() const;

    /// Lambda and alpha after the variant overrides (cls: lambda 0; coarse: alpha 0; fine: alpha 1).
    double effective_lambda() const;
    double effective_alpha() const;
    bool uses_text() const { return variant != Variant::cls; }
};

/// JSON keys are the field names above; unknown keys are rejected.
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& json);

}  // namespace ldg::train
