#include <algorithm>
#include <cmath>

#include "ldg/kernels/kernels.hpp"
#include "ldg/nd/ops.hpp"

namespace ldg::nd {

namespace kp = ldg::kernels::parallel;

namespace {

// Size of the repeating block of `b` when broadcast against `a`.
std::size_t broadcast_block(const Tensor& a, const Tensor& b, const char* op) {
    if (b.shape() == a.shape()) return a.numel();
    if (b.numel() == 1) return 1;
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (bs.size() <= as.size() && std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()))) {
        return b.numel();
    }
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(bs) + " onto " + shape_str(as));
}

std::size_t last_axis(const Tensor& x, const char* op) {
    if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError(std::string(op) + ": empty last axis");
    return x.shape().back();
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    const std::size_t block = broadcast_block(a, b, "add");
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i % block];
    return make_result(OpKind::add, a.shape(), std::move(out), {a, b}, [block](Node& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        if (na.requires_grad) na.accumulate(self.grad);
        if (nb.requires_grad) {
            auto& gb = nb.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % block] += self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const std::size_t block = broadcast_block(a, b, "mul");
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i % block];
    return make_result(OpKind::mul, a.shape(), std::move(out), {a, b}, [block](Node& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        const auto& g = self.grad;
        if (na.requires_grad) {
            auto& ga = na.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * nb.value[i % block];
        }
        if (nb.requires_grad) {
            auto& gb = nb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % block] += g[i] * na.value[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    const auto av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
    return make_result(OpKind::scale, a.shape(), std::move(out), {a}, [factor](Node& self) {
        auto& ga = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * factor;
    });
}

Tensor relu(const Tensor& x) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return make_result(OpKind::relu, x.shape(), std::move(out), {x}, [](Node& self) {
        auto& in = *self.inputs[0];
        auto& gx = in.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (in.value[i] > 0.0) gx[i] += self.grad[i];
        }
    });
}

Tensor log(const Tensor& x) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::log(xv[i]);
    return make_result(OpKind::log, x.shape(), std::move(out), {x}, [](Node& self) {
        auto& in = *self.inputs[0];
        auto& gx = in.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] / in.value[i];
    });
}

Tensor exp(const Tensor& x) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
    return make_result(OpKind::exp, x.shape(), std::move(out), {x}, [](Node& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * self.value[i];
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(m * n);
    kp::matmul(m, k, n, a.values(), b.values(), out);
    return make_result(OpKind::matmul, {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        if (na.requires_grad) {
            std::vector<double> da(m * k);
            kp::matmul_nt(m, n, k, self.grad, nb.value, da);
            na.accumulate(da);
        }
        if (nb.requires_grad) kp::matmul_tn_acc(m, k, n, na.value, self.grad, nb.grad_buffer());
    });
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t r = a.dim(0), c = a.dim(1);
    const auto av = a.values();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    return make_result(OpKind::transpose, {c, r}, std::move(out), {a}, [r, c](Node& self) {
        auto& ga = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "linear");
    const std::size_t in = weight.dim(0), outw = weight.dim(1);
    if (last_axis(x, "linear") != in) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    }
    if (bias.defined() && bias.shape() != Shape{outw}) throw ShapeError("linear: bias shape " + shape_str(bias.shape()));
    const std::size_t rows = x.numel() / in;
    std::vector<double> out(rows * outw);
    kp::matmul(rows, in, outw, x.values(), weight.values(), out);
    if (bias.defined()) {
        const auto bv = bias.values();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < outw; ++j) out[r * outw + j] += bv[j];
    }
    Shape shape = x.shape();
    shape.back() = outw;
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return make_result(OpKind::linear, std::move(shape), std::move(out), std::move(inputs),
                       [rows, in, outw](Node& self) {
                           auto& nx = *self.inputs[0];
                           auto& nw = *self.inputs[1];
                           if (nx.requires_grad) {
                               std::vector<double> dx(rows * in);
                               kp::matmul_nt(rows, outw, in, self.grad, nw.value, dx);
                               nx.accumulate(dx);
                           }
                           if (nw.requires_grad) kp::matmul_tn_acc(rows, in, outw, nx.value, self.grad, nw.grad_buffer());
                           if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                               auto& gb = self.inputs[2]->grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t j = 0; j < outw; ++j) gb[j] += self.grad[r * outw + j];
                           }
                       });
}

Tensor softmax(const Tensor& x) {
    const std::size_t n = last_axis(x, "softmax");
    const std::size_t rows = x.numel() / n;
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * n;
        double* yr = out.data() + r * n;
        const double m = *std::max_element(xr, xr + n);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - m);
            s += yr[j];
        }
        for (std::size_t j = 0; j < n; ++j) yr[j] /= s;
    }
    return make_result(OpKind::softmax, x.shape(), std::move(out), {x}, [rows, n](Node& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * n;
            const double* g = self.grad.data() + r * n;
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j) d += g[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - d);
        }
    });
}

Tensor log_softmax(const Tensor& x) {
    const std::size_t n = last_axis(x, "log_softmax");
    const std::size_t rows = x.numel() / n;
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * n;
        const double m = *std::max_element(xr, xr + n);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(xr[j] - m);
        const double lse = m + std::log(s);
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xr[j] - lse;
    }
    return make_result(OpKind::log_softmax, x.shape(), std::move(out), {x}, [rows, n](Node& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * n;
            const double* g = self.grad.data() + r * n;
            double gs = 0.0;
            for (std::size_t j = 0; j < n; ++j) gs += g[j];
            for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[j] - std::exp(y[j]) * gs;
        }
    });
}

Tensor logsumexp(const Tensor& x, std::span<const std::uint8_t> mask) {
    const std::size_t n = last_axis(x, "logsumexp");
    const std::size_t rows = x.numel() / n;
    if (!mask.empty() && mask.size() != x.numel()) throw ShapeError("logsumexp: mask size mismatch");
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    if (m.empty()) m.assign(x.numel(), 1);
    const auto xv = x.values();
    std::vector<double> out(rows);
    std::vector<double> weights(x.numel(), 0.0);  // masked softmax, reused by backward
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * n;
        const std::uint8_t* mr = m.data() + r * n;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j)
            if (mr[j]) mx = std::max(mx, xr[j]);
        if (mx == -INFINITY) throw ShapeError("logsumexp: row " + std::to_string(r) + " has no unmasked entry");
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!mr[j]) continue;
            weights[r * n + j] = std::exp(xr[j] - mx);
            s += weights[r * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) weights[r * n + j] /= s;
        out[r] = mx + std::log(s);
    }
    Shape shape(x.shape().begin(), x.shape().end() - 1);
    if (shape.empty()) shape = {1};
    return make_result(OpKind::logsumexp, std::move(shape), std::move(out), {x},
                       [rows, n, w = std::move(weights)](Node& self) {
                           auto& gx = self.inputs[0]->grad_buffer();
                           for (std::size_t r = 0; r < rows; ++r)
                               for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += self.grad[r] * w[r * n + j];
                       });
}

Tensor l2_normalize(const Tensor& x) {
    const std::size_t n = last_axis(x, "l2_normalize");
    const std::size_t rows = x.numel() / n;
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += xv[r * n + j] * xv[r * n + j];
        norms[r] = std::sqrt(s);
        for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xv[r * n + j] / norms[r];
    }
    return make_result(OpKind::l2_normalize, x.shape(), std::move(out), {x},
                       [rows, n, norms = std::move(norms)](Node& self) {
                           auto& gx = self.inputs[0]->grad_buffer();
                           for (std::size_t r = 0; r < rows; ++r) {
                               const double* y = self.value.data() + r * n;
                               const double* g = self.grad.data() + r * n;
                               double d = 0.0;
                               for (std::size_t j = 0; j < n; ++j) d += y[j] * g[j];
                               for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += (g[j] - y[j] * d) / norms[r];
                           }
                       });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    const std::size_t n = last_axis(x, "layernorm");
    if (gamma.shape() != Shape{n} || beta.shape() != Shape{n}) throw ShapeError("layernorm: affine shape mismatch");
    const std::size_t rows = x.numel() / n;
    const auto xv = x.values();
    const auto gv = gamma.values();
    const auto bv = beta.values();
    std::vector<double> out(xv.size());
    std::vector<double> xhat(xv.size());
    std::vector<double> invstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xv.data() + r * n;
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xr[j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(n);
        invstd[r] = 1.0 / std::sqrt(var + kNormEpsilon);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[r * n + j] = (xr[j] - mu) * invstd[r];
            out[r * n + j] = gv[j] * xhat[r * n + j] + bv[j];
        }
    }
    return make_result(OpKind::layernorm, x.shape(), std::move(out), {x, gamma, beta},
                       [rows, n, xhat = std::move(xhat), invstd = std::move(invstd)](Node& self) {
                           auto& nx = *self.inputs[0];
                           auto& ng = *self.inputs[1];
                           auto& nb = *self.inputs[2];
                           const auto& g = self.grad;
                           if (ng.requires_grad || nb.requires_grad) {
                               for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t j = 0; j < n; ++j) {
                                       if (ng.requires_grad) ng.grad_buffer()[j] += g[r * n + j] * xhat[r * n + j];
                                       if (nb.requires_grad) nb.grad_buffer()[j] += g[r * n + j];
                                   }
                           }
                           if (!nx.requires_grad) return;
                           auto& gx = nx.grad_buffer();
                           const double dn = static_cast<double>(n);
                           std::vector<double> dxhat(n);
                           for (std::size_t r = 0; r < rows; ++r) {
                               double s1 = 0.0, s2 = 0.0;
                               for (std::size_t j = 0; j < n; ++j) {
                                   dxhat[j] = g[r * n + j] * ng.value[j];
                                   s1 += dxhat[j];
                                   s2 += dxhat[j] * xhat[r * n + j];
                               }
                               for (std::size_t j = 0; j < n; ++j) {
                                   gx[r * n + j] += invstd[r] / dn * (dn * dxhat[j] - s1 - xhat[r * n + j] * s2);
                               }
                           }
                       });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
    require_rank(table, 2, "embedding");
    const std::size_t rows = table.dim(0), width = table.dim(1);
    const auto tv = table.values();
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    std::vector<double> out(idx.size() * width);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows) throw ShapeError("embedding: id " + std::to_string(idx[i]) + " >= " + std::to_string(rows));
        std::copy_n(tv.data() + idx[i] * width, width, out.data() + i * width);
    }
    const std::size_t count = idx.size();
    return make_result(OpKind::embedding, {count, width}, std::move(out), {table},
                       [width, idx = std::move(idx)](Node& self) {
                           auto& gt = self.inputs[0]->grad_buffer();
                           for (std::size_t i = 0; i < idx.size(); ++i)
                               for (std::size_t j = 0; j < width; ++j) gt[idx[i] * width + j] += self.grad[i * width + j];
                       });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw ShapeError("concat: axis out of range");
    Shape shape = first;
    shape[axis] = 0;
    std::vector<std::size_t> chunk(parts.size());
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= first[a];
    for (std::size_t a = axis + 1; a < first.size(); ++a) inner *= first[a];
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Shape& s = parts[i].shape();
        if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t a = 0; a < s.size(); ++a)
            if (a != axis && s[a] != first[a]) throw ShapeError("concat: extent mismatch on axis " + std::to_string(a));
        shape[axis] += s[axis];
        chunk[i] = s[axis] * inner;
    }
    const std::size_t row = shape[axis] * inner;
    std::vector<double> out(outer * row);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto v = parts[i].values();
        for (std::size_t o = 0; o < outer; ++o) std::copy_n(v.data() + o * chunk[i], chunk[i], out.data() + o * row + offset);
        offset += chunk[i];
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return make_result(OpKind::concat, std::move(shape), std::move(out), std::move(inputs),
                       [outer, row, chunk = std::move(chunk)](Node& self) {
                           std::size_t offset = 0;
                           for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                               auto& in = *self.inputs[i];
                               if (in.requires_grad) {
                                   auto& gi = in.grad_buffer();
                                   for (std::size_t o = 0; o < outer; ++o)
                                       for (std::size_t j = 0; j < chunk[i]; ++j)
                                           gi[o * chunk[i] + j] += self.grad[o * row + offset + j];
                               }
                               offset += chunk[i];
                           }
                       });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_result(OpKind::reshape, std::move(shape), std::move(out), {x},
                       [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_result(OpKind::sum, {1}, {s}, {x}, [](Node& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        for (auto& g : gx) g += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw ShapeError("mean of empty tensor");
    double s = 0.0;
    for (double v : x.values()) s += v;
    const double n = static_cast<double>(x.numel());
    return make_result(OpKind::mean, {1}, {s / n}, {x}, [n](Node& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        for (auto& g : gx) g += self.grad[0] / n;
    });
}

}  // namespace ldg::nd
