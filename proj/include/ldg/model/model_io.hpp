#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ldg/model/image_encoder.hpp"
#include "ldg/model/losses.hpp"
#include "ldg/model/text_encoder.hpp"
#include "ldg/text/bpe.hpp"

namespace ldg::model {

/// Image encoder plus, for the language-aware variants, the text side.
struct LdgModel {
    ImageEncoder image;
    std::optional<TextEncoder> text;
    std::optional<text::BpeVocab> vocab;
    loss::Temperature temperature;

    bool has_text() const { return text.has_value(); }
    /// Deep copy (the encoders' tensors are shared handles otherwise).
    LdgModel clone() const;
    /// All trainable tensors: image, then text and the log logit-scale when present.
    ParamList parameters() const;
};

// LDGM1: "LDGM1\n", JSON manifest line [{name, shape, byte_offset}, ...], newline,
// then every tensor as little-endian float32, concatenated in manifest order.
std::string encode_tensors(const ParamList& tensors);
ParamList decode_tensors(const std::string& bytes);

/// Architecture is stored alongside the weights as small "img.arch"/"txt.arch" tensors.
/// With include_text = false every "txt." entry is left out.
std::string encode_model(const LdgModel& model, bool include_text = true);
LdgModel decode_model(const std::string& bytes);

void save_model(const LdgModel& model, const std::filesystem::path& path, bool include_text = true);
LdgModel load_model(const std::filesystem::path& path);

}  // namespace ldg::model
