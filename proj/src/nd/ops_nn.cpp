#include <algorithm>
#include <cmath>

#include "ldg/kernels/kernels.hpp"
#include "ldg/nd/ops.hpp"

namespace ldg::nd {

namespace kp = ldg::kernels::parallel;

Tensor conv3d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv3dAttrs& attrs) {
    if (x.rank() != 5 || weight.rank() != 5) {
        throw ShapeError("conv3d: expected rank-5 input and weight, got " + shape_str(x.shape()) + " and " +
                         shape_str(weight.shape()));
    }
    if (weight.dim(1) != x.dim(1)) {
        throw ShapeError("conv3d: input channels " + std::to_string(x.dim(1)) + " vs weight " +
                         shape_str(weight.shape()));
    }
    if (bias.defined() && bias.shape() != Shape{weight.dim(0)}) throw ShapeError("conv3d: bias shape mismatch");

    kernels::Conv3dGeometry g;
    g.batch = x.dim(0);
    g.in_channels = x.dim(1);
    g.out_channels = weight.dim(0);
    g.in = {x.dim(2), x.dim(3), x.dim(4)};
    g.kernel = {weight.dim(2), weight.dim(3), weight.dim(4)};
    g.stride = attrs.stride;
    g.padding = attrs.padding;
    std::array<std::size_t, 3> o;
    try {
        o = g.out();
    } catch (const std::invalid_argument& e) {
        throw ShapeError(e.what());
    }

    std::vector<double> out(g.batch * g.out_channels * o[0] * o[1] * o[2]);
    std::span<const double> bv = bias.defined() ? bias.values() : std::span<const double>{};
    kp::conv3d_forward(g, x.values(), weight.values(), bv, out);

    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return make_result(OpKind::conv3d, {g.batch, g.out_channels, o[0], o[1], o[2]}, std::move(out), std::move(inputs),
                       [g](Node& self) {
                           auto& nx = *self.inputs[0];
                           auto& nw = *self.inputs[1];
                           const bool has_bias = self.inputs.size() > 2 && self.inputs[2]->requires_grad;
                           if (nx.requires_grad) kp::conv3d_backward_input(g, self.grad, nw.value, nx.grad_buffer());
                           if (nw.requires_grad || has_bias) {
                               std::vector<double> dw(nw.value.size(), 0.0);
                               std::vector<double> db(g.out_channels, 0.0);
                               kp::conv3d_backward_weight(g, nx.value, self.grad, dw, db);
                               if (nw.requires_grad) nw.accumulate(dw);
                               if (has_bias) self.inputs[2]->accumulate(db);
                           }
                       });
}

Tensor maxpool3d(const Tensor& x, const Pool3dAttrs& attrs) {
    if (x.rank() != 5) throw ShapeError("maxpool3d: expected rank-5 input, got " + shape_str(x.shape()));
    const std::size_t planes = x.dim(0) * x.dim(1);
    const std::array<std::size_t, 3> in{x.dim(2), x.dim(3), x.dim(4)};
    std::array<std::size_t, 3> o{};
    for (int a = 0; a < 3; ++a) {
        if (attrs.kernel[a] == 0 || attrs.stride[a] == 0) throw ShapeError("maxpool3d: zero kernel or stride");
        if (in[a] < attrs.kernel[a]) {
            throw ShapeError("maxpool3d: window " + std::to_string(attrs.kernel[a]) + " exceeds extent " +
                             std::to_string(in[a]) + " of " + shape_str(x.shape()));
        }
        o[a] = (in[a] - attrs.kernel[a]) / attrs.stride[a] + 1;
    }
    const std::size_t in_vol = in[0] * in[1] * in[2];
    const std::size_t out_vol = o[0] * o[1] * o[2];
    const auto xv = x.values();
    std::vector<double> out(planes * out_vol);
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const double* xp = xv.data() + pl * in_vol;
        std::size_t q = pl * out_vol;
        for (std::size_t od = 0; od < o[0]; ++od)
            for (std::size_t oh = 0; oh < o[1]; ++oh)
                for (std::size_t ow = 0; ow < o[2]; ++ow, ++q) {
                    std::size_t best = 0;
                    double best_v = -INFINITY;
                    bool first = true;
                    for (std::size_t a = 0; a < attrs.kernel[0]; ++a)
                        for (std::size_t b = 0; b < attrs.kernel[1]; ++b)
                            for (std::size_t c = 0; c < attrs.kernel[2]; ++c) {
                                const std::size_t idx = ((od * attrs.stride[0] + a) * in[1] + oh * attrs.stride[1] + b) * in[2] +
                                                        ow * attrs.stride[2] + c;
                                // Strict comparison in ascending index order keeps the lowest tied index.
                                if (first || xp[idx] > best_v) {
                                    best_v = xp[idx];
                                    best = idx;
                                    first = false;
                                }
                            }
                    out[q] = best_v;
                    argmax[q] = pl * in_vol + best;
                }
    }
    return make_result(OpKind::maxpool3d, {x.dim(0), x.dim(1), o[0], o[1], o[2]}, std::move(out), {x},
                       [argmax = std::move(argmax)](Node& self) {
                           auto& gx = self.inputs[0]->grad_buffer();
                           for (std::size_t q = 0; q < argmax.size(); ++q) gx[argmax[q]] += self.grad[q];
                       });
}

Tensor batchnorm3d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training) {
    if (x.rank() != 5) throw ShapeError("batchnorm3d: expected rank-5 input, got " + shape_str(x.shape()));
    const std::size_t N = x.dim(0), C = x.dim(1);
    const std::size_t vol = x.dim(2) * x.dim(3) * x.dim(4);
    if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) throw ShapeError("batchnorm3d: affine shape mismatch");
    if (state.running_mean.size() != C || state.running_var.size() != C) {
        throw ShapeError("batchnorm3d: running statistics sized for " + std::to_string(state.running_mean.size()) +
                         " channels, input has " + std::to_string(C));
    }
    const double m = static_cast<double>(N * vol);
    const auto xv = x.values();
    const auto gv = gamma.values();
    const auto bv = beta.values();
    std::vector<double> mean(C), invstd(C);
    for (std::size_t c = 0; c < C; ++c) {
        if (training) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* p = xv.data() + (n * C + c) * vol;
                for (std::size_t i = 0; i < vol; ++i) s += p[i];
            }
            const double mu = s / m;
            double ss = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* p = xv.data() + (n * C + c) * vol;
                for (std::size_t i = 0; i < vol; ++i) ss += (p[i] - mu) * (p[i] - mu);
            }
            const double var = ss / m;
            mean[c] = mu;
            invstd[c] = 1.0 / std::sqrt(var + kNormEpsilon);
            const double unbiased = m > 1.0 ? ss / (m - 1.0) : var;
            state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu;
            state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            mean[c] = state.running_mean[c];
            invstd[c] = 1.0 / std::sqrt(state.running_var[c] + kNormEpsilon);
        }
    }
    std::vector<double> xhat(xv.size());
    std::vector<double> out(xv.size());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (n * C + c) * vol;
            for (std::size_t i = 0; i < vol; ++i) {
                xhat[base + i] = (xv[base + i] - mean[c]) * invstd[c];
                out[base + i] = gv[c] * xhat[base + i] + bv[c];
            }
        }
    return make_result(
        OpKind::batchnorm3d, x.shape(), std::move(out), {x, gamma, beta},
        [N, C, vol, m, training, xhat = std::move(xhat), invstd = std::move(invstd)](Node& self) {
            auto& nx = *self.inputs[0];
            auto& ng = *self.inputs[1];
            auto& nb = *self.inputs[2];
            const auto& g = self.grad;
            std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t base = (n * C + c) * vol;
                    for (std::size_t i = 0; i < vol; ++i) {
                        sum_dy[c] += g[base + i];
                        sum_dy_xhat[c] += g[base + i] * xhat[base + i];
                    }
                }
            if (ng.requires_grad) ng.accumulate(sum_dy_xhat);
            if (nb.requires_grad) nb.accumulate(sum_dy);
            if (!nx.requires_grad) return;
            auto& gx = nx.grad_buffer();
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t base = (n * C + c) * vol;
                    const double gam = ng.value[c];
                    for (std::size_t i = 0; i < vol; ++i) {
                        if (training) {
                            gx[base + i] += gam * invstd[c] / m *
                                            (m * g[base + i] - sum_dy[c] - xhat[base + i] * sum_dy_xhat[c]);
                        } else {
                            gx[base + i] += gam * invstd[c] * g[base + i];
                        }
                    }
                }
        });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionAttrs& attrs) {
    if (q.rank() != 2 || k.shape() != q.shape() || v.shape() != q.shape()) {
        throw ShapeError("attention: q, k, v must share a rank-2 shape, got " + shape_str(q.shape()) + ", " +
                         shape_str(k.shape()) + ", " + shape_str(v.shape()));
    }
    const std::size_t L = q.dim(0), width = q.dim(1), H = attrs.heads;
    if (H == 0 || width % H != 0) throw ShapeError("attention: width " + std::to_string(width) + " not divisible by heads");
    if (!attrs.key_mask.empty() && attrs.key_mask.size() != L) throw ShapeError("attention: key mask length mismatch");
    const std::size_t dh = width / H;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto qv = q.values(), kv = k.values(), vv = v.values();

    auto allowed = [&attrs](std::size_t i, std::size_t j) {
        if (attrs.causal && j > i) return false;
        return attrs.key_mask.empty() || attrs.key_mask[j] != 0;
    };

    std::vector<double> probs(H * L * L, 0.0);
    std::vector<double> out(L * width, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < L; ++i) {
            double* p = probs.data() + (h * L + i) * L;
            double mx = -INFINITY;
            for (std::size_t j = 0; j < L; ++j) {
                if (!allowed(i, j)) continue;
                p[j] = kernels::dot(qv.data() + i * width + off, kv.data() + j * width + off, dh) * sc;
                mx = std::max(mx, p[j]);
            }
            if (mx == -INFINITY) throw ShapeError("attention: query " + std::to_string(i) + " sees no key");
            double s = 0.0;
            for (std::size_t j = 0; j < L; ++j) {
                if (!allowed(i, j)) continue;
                p[j] = std::exp(p[j] - mx);
                s += p[j];
            }
            for (std::size_t j = 0; j < L; ++j) {
                if (!allowed(i, j)) continue;
                p[j] /= s;
                const double* vr = vv.data() + j * width + off;
                double* orow = out.data() + i * width + off;
                for (std::size_t t = 0; t < dh; ++t) orow[t] += p[j] * vr[t];
            }
        }
    }
    return make_result(
        OpKind::attention, q.shape(), std::move(out), {q, k, v},
        [L, width, H, dh, sc, probs = std::move(probs)](Node& self) {
            auto& nq = *self.inputs[0];
            auto& nk = *self.inputs[1];
            auto& nv = *self.inputs[2];
            std::vector<double> dq(L * width, 0.0), dk(L * width, 0.0), dvv(L * width, 0.0);
            std::vector<double> dp(L), ds(L);
            for (std::size_t h = 0; h < H; ++h) {
                const std::size_t off = h * dh;
                for (std::size_t i = 0; i < L; ++i) {
                    const double* p = probs.data() + (h * L + i) * L;
                    const double* go = self.grad.data() + i * width + off;
                    double dot_pd = 0.0;
                    for (std::size_t j = 0; j < L; ++j) {
                        dp[j] = p[j] == 0.0 ? 0.0 : kernels::dot(go, nv.value.data() + j * width + off, dh);
                        dot_pd += p[j] * dp[j];
                    }
                    for (std::size_t j = 0; j < L; ++j) {
                        ds[j] = p[j] * (dp[j] - dot_pd) * sc;
                        if (p[j] != 0.0) {
                            double* dvr = dvv.data() + j * width + off;
                            for (std::size_t t = 0; t < dh; ++t) dvr[t] += p[j] * go[t];
                        }
                    }
                    double* dqr = dq.data() + i * width + off;
                    const double* qr = nq.value.data() + i * width + off;
                    for (std::size_t j = 0; j < L; ++j) {
                        if (ds[j] == 0.0) continue;
                        const double* kr = nk.value.data() + j * width + off;
                        double* dkr = dk.data() + j * width + off;
                        for (std::size_t t = 0; t < dh; ++t) {
                            dqr[t] += ds[j] * kr[t];
                            dkr[t] += ds[j] * qr[t];
                        }
                    }
                }
            }
            if (nq.requires_grad) nq.accumulate(dq);
            if (nk.requires_grad) nk.accumulate(dk);
            if (nv.requires_grad) nv.accumulate(dvv);
        });
}

Tensor eval_primitive(OpKind kind, std::span<const Tensor> inputs, const PrimitiveAttrs& attrs) {
    auto need = [&](std::size_t n) {
        if (inputs.size() < n) {
            throw ShapeError(std::string(to_string(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                             std::to_string(inputs.size()));
        }
    };
    auto opt = [&](std::size_t i) { return inputs.size() > i ? inputs[i] : Tensor{}; };
    switch (kind) {
        case OpKind::add: need(2); return add(inputs[0], inputs[1]);
        case OpKind::mul: need(2); return mul(inputs[0], inputs[1]);
        case OpKind::scale: need(1); return scale(inputs[0], attrs.factor);
        case OpKind::matmul: need(2); return matmul(inputs[0], inputs[1]);
        case OpKind::transpose: need(1); return transpose(inputs[0]);
        case OpKind::linear: need(2); return linear(inputs[0], inputs[1], opt(2));
        case OpKind::conv3d: need(2); return conv3d(inputs[0], inputs[1], opt(2), attrs.conv);
        case OpKind::maxpool3d: need(1); return maxpool3d(inputs[0], attrs.pool);
        case OpKind::batchnorm3d:
            need(3);
            if (attrs.batchnorm == nullptr) throw ShapeError("batchnorm3d: running state attribute missing");
            return batchnorm3d(inputs[0], inputs[1], inputs[2], *attrs.batchnorm, attrs.training);
        case OpKind::relu: need(1); return relu(inputs[0]);
        case OpKind::log: need(1); return log(inputs[0]);
        case OpKind::exp: need(1); return exp(inputs[0]);
        case OpKind::layernorm: need(3); return layernorm(inputs[0], inputs[1], inputs[2]);
        case OpKind::softmax: need(1); return softmax(inputs[0]);
        case OpKind::log_softmax: need(1); return log_softmax(inputs[0]);
        case OpKind::logsumexp: need(1); return logsumexp(inputs[0], attrs.mask);
        case OpKind::embedding: need(1); return embedding(inputs[0], attrs.ids);
        case OpKind::attention: need(3); return attention(inputs[0], inputs[1], inputs[2], attrs.attention);
        case OpKind::l2_normalize: need(1); return l2_normalize(inputs[0]);
        case OpKind::concat: need(1); return concat(inputs, attrs.axis);
        case OpKind::reshape: need(1); return reshape(inputs[0], attrs.shape);
        case OpKind::mean: need(1); return mean(inputs[0]);
        case OpKind::sum: need(1); return sum(inputs[0]);
        case OpKind::leaf: break;
    }
    throw ShapeError("unknown primitive kind " + std::string(to_string(kind)));
}

}  // namespace ldg::nd
