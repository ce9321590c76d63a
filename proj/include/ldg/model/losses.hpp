#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "ldg/nd/tensor.hpp"

namespace ldg::loss {

using nd::Tensor;

/// Candidate set in the contrastive denominator.
enum class Denominator {
    all_candidates,  // every candidate except the anchor itself, positives included
    negatives_only,  // other-class candidates only; an anchor with positives but no negatives is an error
};

inline const double kInitialLogScale = std::log(1.0 / 0.07);
inline constexpr double kMinLogScale = 0.0;
inline const double kMaxLogScale = std::log(100.0);

/// Learnable log logit-scale theta; the similarity multiplier is exp(theta).
struct Temperature {
    Tensor theta = Tensor::from({1}, {kInitialLogScale}, true);

    double scale() const { return std::exp(theta.item()); }
    double tau() const { return 1.0 / scale(); }
    /// Keeps exp(theta) inside [1, 100].
    void clamp();
};

/// -log(probs[label]) for an explicit probability vector.
double cross_entropy(std::span<const double> probs, std::size_t label);

/// Mean over the batch of -log softmax(logits)[label]; logits are [N, C].
Tensor classification_loss_sd(const Tensor& logits, std::span<const std::uint16_t> labels);

struct ContrastiveResult {
    Tensor loss;                   // scalar; zero when no anchor has a positive
    std::size_t anchors = 0;       // anchors that contributed
    bool no_positives = false;     // set when nothing contributed
};

/// Supervised contrastive loss over one feature set [n, k]; labels are 0-based or 1-based ids.
ContrastiveResult supcon(const Tensor& features, std::span<const std::uint16_t> labels, const Tensor& theta,
                         Denominator denom = Denominator::all_candidates);

/// Image-to-text over rows of V plus text-to-image over rows of L, averaged over every contributing anchor.
ContrastiveResult bidirectional_alignment(const Tensor& visual, std::span<const std::uint16_t> visual_labels,
                                          const Tensor& textual, std::span<const std::uint16_t> text_labels,
                                          const Tensor& theta, Denominator denom = Denominator::all_candidates);

/// One coarse prompt feature per image.
ContrastiveResult coarse_alignment(const Tensor& visual, std::span<const std::uint16_t> labels, const Tensor& coarse,
                                   const Tensor& theta, Denominator denom = Denominator::all_candidates);

/// Two fine-text features per image, rows ordered (image 0 text 1, image 0 text 2, image 1 text 1, ...).
ContrastiveResult fine_alignment(const Tensor& visual, std::span<const std::uint16_t> labels, const Tensor& fine,
                                 const Tensor& theta, Denominator denom = Denominator::all_candidates);

/// L_SD + lambda * ((1 - alpha) * L_coarse + alpha * L_fine).
double total_loss(double sd, double coarse, double fine, double lambda, double alpha);
Tensor total_loss(const Tensor& sd, const Tensor& coarse, const Tensor& fine, double lambda, double alpha);

}  // namespace ldg::loss
