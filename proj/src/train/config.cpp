#include "ldg/train/config.hpp"

#include <stdexcept>
#include <type_traits>

#include "json.hpp"

namespace ldg::train {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::cls: return "cls";
        case Variant::coarse: return "coarse";
        case Variant::fine: return "fine";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::full, Variant::cls, Variant::coarse, Variant::fine})
        if (to_string(v) == name) return v;
    throw std::invalid_argument("unknown variant '" + name + "' (expected full, cls, coarse or fine)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (patch_size % 2 == 0) throw std::invalid_argument("patch_size must be odd");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in (0, 1)");
    if (eval_batch == 0) throw std::invalid_argument("eval_batch must be >= 1");
}

double TrainConfig::effective_lambda() const { return variant == Variant::cls ? 0.0 : lambda; }

double TrainConfig::effective_alpha() const {
    switch (variant) {
        case Variant::coarse: return 0.0;
        case Variant::fine: return 1.0;
        default: return alpha;
    }
}

std::string config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["learning_rate"] = c.learning_rate;
    j["lambda"] = c.lambda;
    j["alpha"] = c.alpha;
    j["weight_decay"] = c.weight_decay;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["patch_size"] = c.patch_size;
    j["seed"] = c.seed;
    j["variant"] = to_string(c.variant);
    j["augment"] = c.augment;
    j["val_fraction"] = c.val_fraction;
    j["steps_per_epoch"] = c.steps_per_epoch;
    j["widths"] = c.widths;
    j["d_sem"] = c.d_sem;
    j["text_layers"] = c.text_layers;
    j["text_width"] = c.text_width;
    j["text_heads"] = c.text_heads;
    j["bpe_merges"] = c.bpe_merges;
    j["normalize"] = c.normalize;
    j["eval_batch"] = c.eval_batch;
    return j.dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    TrainConfig c;
    const nlohmann::json defaults = nlohmann::json::parse(config_to_json(c));
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
    }
    const auto read = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!j.at(key).is_number_unsigned()) {
                throw std::invalid_argument(std::string("config key '") + key + "' must be a non-negative integer");
            }
        }
        try {
            j.at(key).get_to(field);
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
        }
    };
    read("learning_rate", c.learning_rate);
    read("lambda", c.lambda);
    read("alpha", c.alpha);
    read("weight_decay", c.weight_decay);
    read("batch_size", c.batch_size);
    read("epochs", c.epochs);
    read("patch_size", c.patch_size);
    read("seed", c.seed);
    if (j.contains("variant")) {
        if (!j["variant"].is_string()) throw std::invalid_argument("config key 'variant' has the wrong type");
        c.variant = parse_variant(j["variant"].get<std::string>());
    }
    read("augment", c.augment);
    read("val_fraction", c.val_fraction);
    read("steps_per_epoch", c.steps_per_epoch);
    read("widths", c.widths);
    read("d_sem", c.d_sem);
    read("text_layers", c.text_layers);
    read("text_width", c.text_width);
    read("text_heads", c.text_heads);
    read("bpe_merges", c.bpe_merges);
    read("normalize", c.normalize);
    read("eval_batch", c.eval_batch);
    c.validate();
    return c;
}

}  // namespace ldg::train
