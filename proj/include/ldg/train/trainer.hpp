#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ldg/hsi/cube.hpp"
#include "ldg/hsi/split.hpp"
#include "ldg/model/model_io.hpp"
#include "ldg/text/bpe.hpp"
#include "ldg/text/prompts.hpp"
#include "ldg/train/adam.hpp"
#include "ldg/train/config.hpp"
#include "ldg/train/metrics.hpp"

namespace ldg::train {

/// Tokenized prompts per class: rows 0..C-1 coarse, then C + 2k and C + 2k + 1 the two fine texts of class k+1.
struct PromptSet {
    text::ClassCatalog catalog;
    text::BpeVocab vocab;
    std::vector<text::TokenSeq> sequences;

    PromptSet() = default;
    PromptSet(text::ClassCatalog catalog, text::BpeVocab vocab);
    std::size_t classes() const { return catalog.size(); }
    std::size_t coarse_row(std::uint16_t label) const { return label - 1u; }
    std::size_t fine_row(std::uint16_t label, std::size_t which) const { return classes() + 2 * (label - 1u) + which; }
};

/// Source scene after preprocessing, with its train/val split.
struct SourceData {
    hsi::HsiCube cube;
    hsi::LabelRaster labels;
    hsi::TrainValSplit split;
};

SourceData prepare_source(const hsi::Scene& scene, const TrainConfig& config);
/// Band-wise scaling when the model expects it, otherwise the cube as is.
hsi::HsiCube prepare_cube(const hsi::HsiCube& cube, bool normalize);

struct Batch {
    std::vector<double> patches;                 // [N, bands, s, s] contiguous
    std::vector<std::uint16_t> labels;           // class ids 1..C
    std::vector<text::TokenSeq> coarse;          // one per sample
    std::vector<text::TokenSeq> fine;            // two per sample, in sample order
    std::size_t size() const { return labels.size(); }
};

/// Uniform draws (with replacement) from the training split, each paired with its
/// class prompts; augmentation applied when enabled.
Batch build_batch(const SourceData& data, const PromptSet& prompts, const TrainConfig& config, Rng& rng);

struct LossReport {
    double ce = 0.0;  // same as sd: mean cross-entropy of the batch
    double sd = 0.0;
    std::optional<double> coarse;
    std::optional<double> fine;
    double total = 0.0;
    double tau = 0.0;
};

/// Builds the model the config describes (text side only for language-aware variants).
model::LdgModel init_model(const TrainConfig& config, std::size_t bands, const PromptSet& prompts);

/// One optimization step. The optimizer must have been built over model.parameters().
LossReport train_step(model::LdgModel& model, const Batch& batch, const PromptSet& prompts, const TrainConfig& config,
                      Adam& optimizer);

Adam make_optimizer(const model::LdgModel& model, const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_total = 0.0;
    double val_oa = 0.0;
};

struct FitResult {
    model::LdgModel model;  // best-validation-OA snapshot
    Metrics val_metrics;
    std::size_t best_epoch = 0;  // 0 = initial parameters
    std::vector<EpochRecord> history;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

FitResult fit(const hsi::Scene& source, const text::ClassCatalog& catalog, const TrainConfig& config,
              const ProgressFn& progress = {});

/// Eval-mode prediction for each listed pixel; the text encoder is never consulted.
std::vector<std::uint16_t> predict(model::ImageEncoder& image, const hsi::HsiCube& prepared,
                                   const std::vector<hsi::PixelIndex>& pixels, std::size_t batch);

/// Metrics over every labeled pixel of a (raw) target scene.
Metrics evaluate(model::ImageEncoder& image, const hsi::HsiCube& cube, const hsi::LabelRaster& labels,
                 std::size_t batch = 256);
Metrics evaluate_pixels(model::ImageEncoder& image, const hsi::HsiCube& prepared,
                        const std::vector<hsi::PixelIndex>& pixels, std::size_t classes, std::size_t batch);

/// Predicted class id per pixel; with a mask, pixels where the mask is 0 stay 0.
hsi::LabelRaster classify_scene(model::ImageEncoder& image, const hsi::HsiCube& cube,
                                const hsi::LabelRaster* mask, std::size_t batch = 256);

struct Grid {
    std::vector<double> learning_rate{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
    std::vector<double> lambda{1e-3, 1e-2, 1e-1, 1e+0, 1e+1};
    std::vector<double> alpha{0.1, 0.3, 0.5, 0.7, 0.9};
    bool cartesian = false;
};

struct GridRow {
    double learning_rate, lambda, alpha, val_oa;
};

struct GridResult {
    std::vector<GridRow> rows;
    GridRow best{};
};

/// Coordinate-wise sweep (learning rate, then lambda, then alpha) starting from the
/// base config values, or the full product when grid.cartesian is set.
GridResult grid_search(const hsi::Scene& source, const text::ClassCatalog& catalog, const TrainConfig& base,
                       const Grid& grid);

struct AblationRow {
    Variant variant;
    std::uint64_t seed;
    double val_oa;
    Metrics target;
};

/// Trains cls, coarse, fine and full with the same seed; target metrics per variant.
std::vector<AblationRow> ablate(const hsi::DomainPair& pair, const text::ClassCatalog& catalog,
                                const TrainConfig& config);

std::string grid_to_csv(const GridResult& g);
std::string ablation_to_csv(const std::vector<AblationRow>& rows);

}  // namespace ldg::train
