#include "ldg/model/text_encoder.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "ldg/nd/ops.hpp"

namespace ldg::model {

using namespace ldg::nd;

void TextEncoderConfig::validate() const {
    if (layers == 0 || width == 0 || heads == 0 || max_len < 2 || vocab == 0 || d_sem < 2) {
        throw std::invalid_argument("text encoder sizes must be positive (max_len >= 2, d_sem >= 2)");
    }
    if (width % heads != 0) {
        throw std::invalid_argument("width " + std::to_string(width) + " is not divisible by " +
                                    std::to_string(heads) + " heads");
    }
}

TextEncoder::TextEncoder(const TextEncoderConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const std::size_t w = config_.width, f = 4 * config_.width;
    token_embedding_ = normal_init({config_.vocab, w}, 0.02, rng);
    position_embedding_ = normal_init({config_.max_len, w}, 0.01, rng);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        TransformerBlock b;
        b.ln1_gamma = Tensor::full({w}, 1.0, true);
        b.ln1_beta = Tensor::zeros({w}, true);
        b.wq = fan_in_uniform({w, w}, w, rng);
        b.bq = Tensor::zeros({w}, true);
        b.wk = fan_in_uniform({w, w}, w, rng);
        b.bk = Tensor::zeros({w}, true);
        b.wv = fan_in_uniform({w, w}, w, rng);
        b.bv = Tensor::zeros({w}, true);
        b.wo = fan_in_uniform({w, w}, w, rng);
        b.bo = Tensor::zeros({w}, true);
        b.ln2_gamma = Tensor::full({w}, 1.0, true);
        b.ln2_beta = Tensor::zeros({w}, true);
        b.fc1_w = fan_in_uniform({w, f}, w, rng);
        b.fc1_b = Tensor::zeros({f}, true);
        b.fc2_w = fan_in_uniform({f, w}, f, rng);
        b.fc2_b = Tensor::zeros({w}, true);
        blocks_.push_back(std::move(b));
    }
    final_gamma_ = Tensor::full({w}, 1.0, true);
    final_beta_ = Tensor::zeros({w}, true);
    proj_weight_ = fan_in_uniform({w, config_.d_sem}, w, rng);
    proj_bias_ = Tensor::zeros({config_.d_sem}, true);
}

Tensor TextEncoder::encode(const text::TokenSeq& seq, text::TokenId end_id, text::TokenId pad_id) const {
    const auto end_it = std::find(seq.begin(), seq.end(), end_id);
    if (end_it == seq.end()) throw std::invalid_argument("token sequence has no END token");
    const std::size_t n = seq.size();
    if (n > config_.max_len) throw ShapeError("token sequence longer than " + std::to_string(config_.max_len));

    std::vector<std::size_t> ids(n), positions(n);
    AttentionAttrs attn;
    attn.heads = config_.heads;
    attn.causal = config_.causal;
    attn.key_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (seq[i] < 0 || static_cast<std::size_t>(seq[i]) >= config_.vocab) {
            throw std::out_of_range("token id " + std::to_string(seq[i]) + " outside the vocabulary");
        }
        ids[i] = static_cast<std::size_t>(seq[i]);
        positions[i] = i;
        attn.key_mask[i] = seq[i] == pad_id ? 0 : 1;
    }

    Tensor h = add(embedding(token_embedding_, ids), embedding(position_embedding_, positions));
    for (const auto& b : blocks_) {
        const Tensor x = layernorm(h, b.ln1_gamma, b.ln1_beta);
        const Tensor a = attention(linear(x, b.wq, b.bq), linear(x, b.wk, b.bk), linear(x, b.wv, b.bv), attn);
        h = add(h, linear(a, b.wo, b.bo));
        const Tensor y = layernorm(h, b.ln2_gamma, b.ln2_beta);
        h = add(h, linear(relu(linear(y, b.fc1_w, b.fc1_b)), b.fc2_w, b.fc2_b));
    }
    const std::size_t end_pos[] = {static_cast<std::size_t>(end_it - seq.begin())};
    const Tensor pooled = layernorm(embedding(h, end_pos), final_gamma_, final_beta_);
    return l2_normalize(linear(pooled, proj_weight_, proj_bias_));
}

Tensor TextEncoder::encode_all(const std::vector<text::TokenSeq>& seqs, text::TokenId end_id,
                               text::TokenId pad_id) const {
    std::vector<Tensor> rows;
    rows.reserve(seqs.size());
    for (const auto& s : seqs) rows.push_back(encode(s, end_id, pad_id));
    return concat(rows, 0);
}

ParamList TextEncoder::parameters() const {
    ParamList p;
    p.push_back({"txt.token_embedding", token_embedding_});
    p.push_back({"txt.position_embedding", position_embedding_});
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const auto& b = blocks_[l];
        const std::string pre = "txt.block" + std::to_string(l + 1);
        p.push_back({pre + ".ln1.gamma", b.ln1_gamma});
        p.push_back({pre + ".ln1.beta", b.ln1_beta});
        p.push_back({pre + ".attn.wq", b.wq});
        p.push_back({pre + ".attn.bq", b.bq});
        p.push_back({pre + ".attn.wk", b.wk});
        p.push_back({pre + ".attn.bk", b.bk});
        p.push_back({pre + ".attn.wv", b.wv});
        p.push_back({pre + ".attn.bv", b.bv});
        p.push_back({pre + ".attn.wo", b.wo});
        p.push_back({pre + ".attn.bo", b.bo});
        p.push_back({pre + ".ln2.gamma", b.ln2_gamma});
        p.push_back({pre + ".ln2.beta", b.ln2_beta});
        p.push_back({pre + ".mlp.fc1.weight", b.fc1_w});
        p.push_back({pre + ".mlp.fc1.bias", b.fc1_b});
        p.push_back({pre + ".mlp.fc2.weight", b.fc2_w});
        p.push_back({pre + ".mlp.fc2.bias", b.fc2_b});
    }
    p.push_back({"txt.final_ln.gamma", final_gamma_});
    p.push_back({"txt.final_ln.beta", final_beta_});
    p.push_back({"txt.proj.weight", proj_weight_});
    p.push_back({"txt.proj.bias", proj_bias_});
    return p;
}

void TextEncoder::load_state(const ParamList& state) {
    for (auto& p : parameters()) {
        const auto it = std::find_if(state.begin(), state.end(), [&](const NamedTensor& e) { return e.name == p.name; });
        if (it == state.end()) throw std::invalid_argument("model state lacks tensor " + p.name);
        if (it->tensor.shape() != p.tensor.shape()) throw std::invalid_argument("tensor " + p.name + " has the wrong shape");
        auto dst = p.tensor.mutable_values();
        std::copy(it->tensor.values().begin(), it->tensor.values().end(), dst.begin());
    }
}

}  // namespace ldg::model
