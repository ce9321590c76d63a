#pragma once

#include <cstdint>
#include <vector>

#include "ldg/model/params.hpp"
#include "ldg/text/bpe.hpp"

namespace ldg::model {

struct TextEncoderConfig {
    std::size_t layers = 2;
    std::size_t width = 64;
    std::size_t heads = 4;
    std::size_t max_len = text::kMaxSequence;
    std::size_t vocab = 256 + text::kDefaultMerges + 3;
    std::size_t d_sem = 64;
    bool causal = false;

    /// Throws std::invalid_argument when width % heads != 0 or a size is zero.
    void validate() const;
};

struct TransformerBlock {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_gamma, ln2_beta;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
};

class TextEncoder {
public:
    TextEncoder() = default;
    TextEncoder(const TextEncoderConfig& config, std::uint64_t seed);

    const TextEncoderConfig& config() const noexcept { return config_; }

    /// Unit-norm [1, d_sem] feature read at the first END token. `pad_id` positions are
    /// hidden from attention. Throws std::invalid_argument if `end_id` is absent.
    Tensor encode(const text::TokenSeq& seq, text::TokenId end_id, text::TokenId pad_id) const;
    /// Stacks encode() over several sequences into [n, d_sem].
    Tensor encode_all(const std::vector<text::TokenSeq>& seqs, text::TokenId end_id, text::TokenId pad_id) const;

    /// Trainable tensors under "txt." names, in a fixed order.
    ParamList parameters() const;
    void load_state(const ParamList& state);

private:
    TextEncoderConfig config_;
    Tensor token_embedding_, position_embedding_;
    std::vector<TransformerBlock> blocks_;
    Tensor final_gamma_, final_beta_;
    Tensor proj_weight_, proj_bias_;
};

}  // namespace ldg::model
