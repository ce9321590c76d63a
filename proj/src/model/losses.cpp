#include "ldg/model/losses.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldg/nd/ops.hpp"

namespace ldg::loss {

using namespace ldg::nd;

void Temperature::clamp() {
    double& t = theta.mutable_values()[0];
    t = std::clamp(t, kMinLogScale, kMaxLogScale);
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
    if (label >= probs.size()) {
        throw std::out_of_range("label " + std::to_string(label) + " outside " + std::to_string(probs.size()) +
                                " classes");
    }
    return -std::log(probs[label]);
}

Tensor classification_loss_sd(const Tensor& logits, std::span<const std::uint16_t> labels) {
    if (logits.rank() != 2) throw ShapeError("classification loss expects [N, C] logits");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    if (n == 0) throw std::invalid_argument("classification loss on an empty batch");
    if (labels.size() != n) throw ShapeError("classification loss: label count != batch size");
    std::vector<double> onehot(n * c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw std::out_of_range("label " + std::to_string(labels[i]) + " outside classes");
        onehot[i * c + labels[i]] = -1.0 / static_cast<double>(n);
    }
    return sum(mul(log_softmax(logits), Tensor::from({n, c}, std::move(onehot))));
}

namespace {

// Per-row contrastive term over a logit matrix Z [rows, cols]:
//   sum_i w_i * ( LSE_{a in D(i)} Z_ia - (1/|P(i)|) sum_{p in P(i)} Z_ip )
// where only rows with a positive take part. Returns the unnormalized sum and
// the number of contributing rows; `exclude_diagonal` removes self-pairs.
struct RowTerms {
    std::vector<double> pos_weight;       // [rows, cols]
    std::vector<double> anchor_weight;    // [rows]
    std::vector<std::uint8_t> lse_mask;   // [rows, cols]
    std::size_t contributing = 0;
};

RowTerms row_terms(std::size_t rows, std::size_t cols, std::span<const std::uint16_t> row_labels,
                   std::span<const std::uint16_t> col_labels, bool exclude_diagonal, Denominator denom) {
    RowTerms t;
    t.pos_weight.assign(rows * cols, 0.0);
    t.anchor_weight.assign(rows, 0.0);
    t.lse_mask.assign(rows * cols, 1);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t positives = 0, negatives = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            if (exclude_diagonal && i == j) continue;
            (row_labels[i] == col_labels[j] ? positives : negatives)++;
        }
        if (positives == 0) continue;  // skipped anchor; its mask stays full so the row is well defined
        if (denom == Denominator::negatives_only && negatives == 0) {
            throw std::domain_error("negatives-only denominator is empty for anchor " + std::to_string(i));
        }
        ++t.contributing;
        t.anchor_weight[i] = 1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            const bool self = exclude_diagonal && i == j;
            const bool pos = !self && row_labels[i] == col_labels[j];
            if (pos) t.pos_weight[i * cols + j] = 1.0 / static_cast<double>(positives);
            bool keep = !self;
            if (denom == Denominator::negatives_only) keep = keep && !pos;
            t.lse_mask[i * cols + j] = keep ? 1 : 0;
        }
    }
    return t;
}

// sum_i w_i*LSE_i - sum_ij P_ij*Z_ij, both scaled by `norm`.
Tensor row_loss(const Tensor& z, const RowTerms& t, double norm) {
    const std::size_t rows = z.dim(0), cols = z.dim(1);
    std::vector<double> pw(t.pos_weight), aw(t.anchor_weight);
    for (auto& v : pw) v *= -norm;
    for (auto& v : aw) v *= norm;
    const Tensor lse = logsumexp(z, t.lse_mask);
    return add(sum(mul(z, Tensor::from({rows, cols}, std::move(pw)))),
               sum(mul(lse, Tensor::from({rows}, std::move(aw)))));
}

void check_features(const Tensor& x, std::size_t labels, const char* what) {
    if (x.rank() != 2) throw ShapeError(std::string(what) + " features must be [n, k]");
    if (x.dim(0) != labels) throw ShapeError(std::string(what) + " feature count != label count");
}

Tensor scaled_similarity(const Tensor& a, const Tensor& b, const Tensor& theta) {
    return mul(matmul(a, transpose(b)), exp(theta));
}

ContrastiveResult no_contribution() {
    return {Tensor::scalar(0.0), 0, true};
}

}  // namespace

ContrastiveResult supcon(const Tensor& features, std::span<const std::uint16_t> labels, const Tensor& theta,
                         Denominator denom) {
    check_features(features, labels.size(), "supcon");
    const std::size_t n = labels.size();
    const RowTerms t = row_terms(n, n, labels, labels, true, denom);
    if (t.contributing == 0) return no_contribution();
    const Tensor z = scaled_similarity(features, features, theta);
    return {row_loss(z, t, 1.0 / static_cast<double>(t.contributing)), t.contributing, false};
}

ContrastiveResult bidirectional_alignment(const Tensor& visual, std::span<const std::uint16_t> visual_labels,
                                          const Tensor& textual, std::span<const std::uint16_t> text_labels,
                                          const Tensor& theta, Denominator denom) {
    check_features(visual, visual_labels.size(), "visual");
    check_features(textual, text_labels.size(), "textual");
    if (visual.dim(1) != textual.dim(1)) throw ShapeError("visual and textual feature widths differ");
    const std::size_t n = visual_labels.size(), m = text_labels.size();
    if (n == 0 || m == 0) throw std::invalid_argument("alignment needs at least one visual and one textual feature");
    const RowTerms i2t = row_terms(n, m, visual_labels, text_labels, false, denom);
    const RowTerms t2i = row_terms(m, n, text_labels, visual_labels, false, denom);
    const std::size_t total = i2t.contributing + t2i.contributing;
    if (total == 0) return no_contribution();
    const double norm = 1.0 / static_cast<double>(total);
    const Tensor z = scaled_similarity(visual, textual, theta);
    return {add(row_loss(z, i2t, norm), row_loss(transpose(z), t2i, norm)), total, false};
}

ContrastiveResult coarse_alignment(const Tensor& visual, std::span<const std::uint16_t> labels, const Tensor& coarse,
                                   const Tensor& theta, Denominator denom) {
    if (coarse.rank() != 2 || coarse.dim(0) != labels.size()) {
        throw ShapeError("coarse alignment needs exactly one text per image");
    }
    return bidirectional_alignment(visual, labels, coarse, labels, theta, denom);
}

ContrastiveResult fine_alignment(const Tensor& visual, std::span<const std::uint16_t> labels, const Tensor& fine,
                                 const Tensor& theta, Denominator denom) {
    if (fine.rank() != 2 || fine.dim(0) != 2 * labels.size()) {
        throw ShapeError("fine alignment needs exactly two texts per image");
    }
    std::vector<std::uint16_t> text_labels;
    text_labels.reserve(2 * labels.size());
    for (auto l : labels) text_labels.insert(text_labels.end(), {l, l});
    return bidirectional_alignment(visual, labels, fine, text_labels, theta, denom);
}

double total_loss(double sd, double coarse, double fine, double lambda, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    return sd + lambda * ((1.0 - alpha) * coarse + alpha * fine);
}

Tensor total_loss(const Tensor& sd, const Tensor& coarse, const Tensor& fine, double lambda, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (lambda == 0.0) return sd;
    return add(sd, add(scale(coarse, lambda * (1.0 - alpha)), scale(fine, lambda * alpha)));
}

}  // namespace ldg::loss
