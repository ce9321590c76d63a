#include "ldg/model/image_encoder.hpp"

#include <stdexcept>
#include <string>

namespace ldg::model {

using namespace ldg::nd;

namespace {

Conv3dAttrs same_padding(std::size_t kernel) {
    Conv3dAttrs a;
    a.padding = {kernel / 2, kernel / 2, kernel / 2};
    return a;
}

Tensor conv_weight(std::size_t in, std::size_t out, std::size_t k, Rng& rng) {
    return kaiming_uniform({out, in, k, k, k}, in * k * k * k, rng);
}

void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
    if (dst.shape() != src.shape()) {
        throw std::invalid_argument("tensor " + name + " has shape " + shape_str(src.shape()) + ", expected " +
                                    shape_str(dst.shape()));
    }
    auto d = dst.mutable_values();
    const auto s = src.values();
    std::copy(s.begin(), s.end(), d.begin());
}

}  // namespace

void ImageEncoderConfig::validate() const {
    if (patch % 2 == 0) throw std::invalid_argument("patch size must be odd");
    if (kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd");
    if (widths[0] == 0 || widths[1] == 0) throw std::invalid_argument("channel widths must be >= 1");
    if (d_sem < 2) throw std::invalid_argument("semantic dimension must be >= 2");
    if (classes < 1) throw std::invalid_argument("class count must be >= 1");
    const auto e = pooled_extent();
    if (e[1] == 0 || e[2] == 0) {
        throw std::invalid_argument("patch size " + std::to_string(patch) +
                                    " is too small for two 2x pooling stages (need >= 4)");
    }
    if (e[0] == 0) {
        throw std::invalid_argument("band count " + std::to_string(bands) +
                                    " is too small for two 2x pooling stages (need >= 4)");
    }
}

std::array<std::size_t, 3> ImageEncoderConfig::pooled_extent() const {
    return {bands / 2 / 2, patch / 2 / 2, patch / 2 / 2};
}

std::size_t ImageEncoderConfig::flat_features() const {
    const auto e = pooled_extent();
    return widths[1] * e[0] * e[1] * e[2];
}

ConvBnRelu ConvBnRelu::make(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
    ConvBnRelu c;
    c.weight = conv_weight(in, out, kernel, rng);
    c.bias = Tensor::zeros({out}, true);
    c.gamma = Tensor::full({out}, 1.0, true);
    c.beta = Tensor::zeros({out}, true);
    c.bn = BatchNormState(out);
    return c;
}

Tensor ConvBnRelu::forward(const Tensor& x, bool training) {
    const std::size_t k = weight.dim(2);
    return relu(batchnorm3d(conv3d(x, weight, bias, same_padding(k)), gamma, beta, bn, training));
}

ResidualBlock ResidualBlock::make(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
    ResidualBlock b;
    b.cbr1 = ConvBnRelu::make(in, out, kernel, rng);
    b.cbr2 = ConvBnRelu::make(out, out, kernel, rng);
    b.conv3_weight = conv_weight(out, out, kernel, rng);
    b.conv3_bias = Tensor::zeros({out}, true);
    return b;
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
    const Tensor skip = cbr1.forward(x, training);
    const Tensor branch =
        conv3d(cbr2.forward(skip, training), conv3_weight, conv3_bias, same_padding(conv3_weight.dim(2)));
    if (branch.shape() != skip.shape()) throw ShapeError("residual addends differ in shape");
    return relu(add(branch, skip));
}

ImageEncoder::ImageEncoder(const ImageEncoderConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const std::size_t k = config_.kernel;
    blocks_.push_back(ResidualBlock::make(1, config_.widths[0], k, rng));
    blocks_.push_back(ResidualBlock::make(config_.widths[0], config_.widths[1], k, rng));
    final_weight_ = conv_weight(config_.widths[1], config_.widths[1], k, rng);
    final_bias_ = Tensor::zeros({config_.widths[1]}, true);
    const std::size_t flat = config_.flat_features();
    cls_weight_ = kaiming_uniform({flat, config_.classes}, flat, rng);
    cls_bias_ = Tensor::zeros({config_.classes}, true);
    proj_weight_ = kaiming_uniform({flat, config_.d_sem}, flat, rng);
    proj_bias_ = Tensor::zeros({config_.d_sem}, true);
}

Tensor ImageEncoder::embed(const Tensor& x, bool training) {
    const auto& c = config_;
    if (x.rank() != 5 || x.dim(1) != 1 || x.dim(2) != c.bands || x.dim(3) != c.patch || x.dim(4) != c.patch) {
        throw ShapeError("image encoder expects [N, 1, " + std::to_string(c.bands) + ", " + std::to_string(c.patch) +
                         ", " + std::to_string(c.patch) + "], got " + shape_str(x.shape()));
    }
    Tensor h = x;
    for (auto& b : blocks_) h = maxpool3d(b.forward(h, training));
    h = conv3d(h, final_weight_, final_bias_, same_padding(c.kernel));
    return reshape(h, {x.dim(0), c.flat_features()});
}

ImageOutput ImageEncoder::forward(const Tensor& x, bool training, bool with_projection) {
    const Tensor flat = embed(x, training);
    ImageOutput out;
    out.logits = linear(flat, cls_weight_, cls_bias_);
    out.probs = softmax(out.logits);
    if (with_projection) out.feature = l2_normalize(linear(flat, proj_weight_, proj_bias_));
    return out;
}

ParamList ImageEncoder::parameters() const {
    ParamList p;
    const auto add_cbr = [&](const std::string& pre, const ConvBnRelu& c) {
        p.push_back({pre + ".conv.weight", c.weight});
        p.push_back({pre + ".conv.bias", c.bias});
        p.push_back({pre + ".bn.gamma", c.gamma});
        p.push_back({pre + ".bn.beta", c.beta});
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string pre = "img.block" + std::to_string(i + 1);
        add_cbr(pre + ".cbr1", blocks_[i].cbr1);
        add_cbr(pre + ".cbr2", blocks_[i].cbr2);
        p.push_back({pre + ".conv3.weight", blocks_[i].conv3_weight});
        p.push_back({pre + ".conv3.bias", blocks_[i].conv3_bias});
    }
    p.push_back({"img.final.weight", final_weight_});
    p.push_back({"img.final.bias", final_bias_});
    p.push_back({"img.cls.weight", cls_weight_});
    p.push_back({"img.cls.bias", cls_bias_});
    p.push_back({"img.proj.weight", proj_weight_});
    p.push_back({"img.proj.bias", proj_bias_});
    return p;
}

ParamList ImageEncoder::state() const {
    ParamList s = parameters();
    const auto add_bn = [&](const std::string& pre, const ConvBnRelu& c) {
        const std::size_t n = c.bn.running_mean.size();
        s.push_back({pre + ".bn.running_mean", Tensor::from({n}, c.bn.running_mean)});
        s.push_back({pre + ".bn.running_var", Tensor::from({n}, c.bn.running_var)});
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string pre = "img.block" + std::to_string(i + 1);
        add_bn(pre + ".cbr1", blocks_[i].cbr1);
        add_bn(pre + ".cbr2", blocks_[i].cbr2);
    }
    return s;
}

void ImageEncoder::load_state(const ParamList& state) {
    const auto find = [&](const std::string& name) -> const Tensor& {
        for (const auto& e : state)
            if (e.name == name) return e.tensor;
        throw std::invalid_argument("model state lacks tensor " + name);
    };
    for (auto& p : parameters()) copy_into(p.tensor, find(p.name), p.name);
    const auto load_bn = [&](const std::string& pre, ConvBnRelu& c) {
        const Tensor& m = find(pre + ".bn.running_mean");
        const Tensor& v = find(pre + ".bn.running_var");
        if (m.numel() != c.bn.running_mean.size() || v.numel() != c.bn.running_var.size()) {
            throw std::invalid_argument("batchnorm statistics of " + pre + " have the wrong length");
        }
        c.bn.running_mean.assign(m.values().begin(), m.values().end());
        c.bn.running_var.assign(v.values().begin(), v.values().end());
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string pre = "img.block" + std::to_string(i + 1);
        load_bn(pre + ".cbr1", blocks_[i].cbr1);
        load_bn(pre + ".cbr2", blocks_[i].cbr2);
    }
}

Tensor patches_to_tensor(const std::vector<const std::vector<double>*>& patches, std::size_t bands, std::size_t patch) {
    const std::size_t per = bands * patch * patch;
    std::vector<double> v;
    v.reserve(patches.size() * per);
    for (const auto* p : patches) {
        if (p->size() != per) throw ShapeError("patch has " + std::to_string(p->size()) + " values, expected " +
                                               std::to_string(per));
        v.insert(v.end(), p->begin(), p->end());
    }
    return Tensor::from({patches.size(), 1, bands, patch, patch}, std::move(v));
}

}  // namespace ldg::model
