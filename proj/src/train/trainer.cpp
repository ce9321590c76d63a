#include "ldg/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <tuple>

#include "ldg/hsi/patch.hpp"
#include "ldg/nd/ops.hpp"

namespace ldg::train {

using model::LdgModel;
using nd::Tensor;

namespace {

// Sub-stream salts; each consumer of randomness gets its own generator.
enum Stream : std::uint64_t { kSplit = 11, kInitImage, kInitText, kBatches };

std::vector<std::uint16_t> zero_based(const std::vector<std::uint16_t>& ids) {
    std::vector<std::uint16_t> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out[i] = static_cast<std::uint16_t>(ids[i] - 1u);
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

PromptSet::PromptSet(text::ClassCatalog cat, text::BpeVocab voc) : catalog(std::move(cat)), vocab(std::move(voc)) {
    const std::size_t c = catalog.size();
    sequences.resize(3 * c);
    for (std::size_t k = 0; k < c; ++k) {
        const auto& meta = catalog.classes[k];
        sequences[k] = text::encode(vocab, build_coarse_prompt(meta, catalog.coarse_template));
        sequences[c + 2 * k] = text::encode(vocab, meta.fine[0]);
        sequences[c + 2 * k + 1] = text::encode(vocab, meta.fine[1]);
    }
}

hsi::HsiCube prepare_cube(const hsi::HsiCube& cube, bool normalize) { return normalize ? hsi::normalize(cube) : cube; }

SourceData prepare_source(const hsi::Scene& scene, const TrainConfig& config) {
    SourceData d;
    d.cube = prepare_cube(scene.cube, config.normalize);
    d.labels = scene.labels;
    d.split = hsi::split_train_val(scene.labels, 1.0 - config.val_fraction, mix_seed(config.seed, kSplit));
    return d;
}

Batch build_batch(const SourceData& data, const PromptSet& prompts, const TrainConfig& config, Rng& rng) {
    const auto& pool = data.split.train;
    if (pool.empty()) throw std::invalid_argument("build_batch: the training split is empty");
    const std::size_t s = config.patch_size;
    const std::size_t per = data.cube.bands() * s * s;
    Batch b;
    b.patches.reserve(config.batch_size * per);
    for (std::size_t i = 0; i < config.batch_size; ++i) {
        const auto& px = pool[rng.index(pool.size())];
        if (px.label == 0 || px.label > prompts.classes()) {
            throw std::invalid_argument("build_batch: label " + std::to_string(px.label) + " has no class prompts");
        }
        hsi::Patch p = hsi::extract_patch(data.cube, px.row, px.col, s);
        if (config.augment) p = hsi::augment_patch(p, rng);
        b.patches.insert(b.patches.end(), p.values.begin(), p.values.end());
        b.labels.push_back(px.label);
        b.coarse.push_back(prompts.sequences[prompts.coarse_row(px.label)]);
        b.fine.push_back(prompts.sequences[prompts.fine_row(px.label, 0)]);
        b.fine.push_back(prompts.sequences[prompts.fine_row(px.label, 1)]);
    }
    return b;
}

LdgModel init_model(const TrainConfig& config, std::size_t bands, const PromptSet& prompts) {
    config.validate();
    model::ImageEncoderConfig ic;
    ic.patch = config.patch_size;
    ic.bands = bands;
    ic.widths = config.widths;
    ic.d_sem = config.d_sem;
    ic.classes = prompts.classes();
    ic.normalize = config.normalize;
    LdgModel m;
    m.image = model::ImageEncoder(ic, mix_seed(config.seed, kInitImage));
    if (config.uses_text()) {
        model::TextEncoderConfig tc;
        tc.layers = config.text_layers;
        tc.width = config.text_width;
        tc.heads = config.text_heads;
        tc.vocab = prompts.vocab.size();
        tc.d_sem = config.d_sem;
        m.text = model::TextEncoder(tc, mix_seed(config.seed, kInitText));
        m.vocab = prompts.vocab;
    }
    return m;
}

Adam make_optimizer(const LdgModel& model, const TrainConfig& config) {
    AdamOptions o;
    o.learning_rate = config.learning_rate;
    o.weight_decay = config.weight_decay;
    return Adam(model.parameters(), o);
}

LossReport train_step(LdgModel& model, const Batch& batch, const PromptSet& prompts, const TrainConfig& config,
                      Adam& optimizer) {
    const double lambda = config.effective_lambda();
    const double alpha = config.effective_alpha();
    const bool language = lambda > 0.0;
    if (config.uses_text() && !model.has_text()) throw std::invalid_argument("train_step: variant needs a text encoder");

    const auto& ic = model.image.config();
    const std::size_t n = batch.size();
    Tensor x = Tensor::from({n, 1, ic.bands, ic.patch, ic.patch}, batch.patches);

    optimizer.zero_grad();
    auto out = model.image.forward(x, true, language);
    const auto labels0 = zero_based(batch.labels);
    Tensor sd = loss::classification_loss_sd(out.logits, labels0);

    LossReport r;
    r.sd = r.ce = sd.item();
    Tensor total = sd;
    if (language) {
        const auto end = prompts.vocab.end_id();
        const auto pad = prompts.vocab.pad_id();
        // Each distinct prompt goes through the encoder once; rows are gathered per sample.
        Tensor all = model.text->encode_all(prompts.sequences, end, pad);
        std::vector<std::size_t> coarse_ids, fine_ids;
        for (const auto label : batch.labels) {
            coarse_ids.push_back(prompts.coarse_row(label));
            fine_ids.push_back(prompts.fine_row(label, 0));
            fine_ids.push_back(prompts.fine_row(label, 1));
        }
        Tensor coarse = nd::embedding(all, coarse_ids);
        Tensor fine = nd::embedding(all, fine_ids);
        const auto& theta = model.temperature.theta;
        auto lc = loss::coarse_alignment(out.feature, batch.labels, coarse, theta);
        auto lf = loss::fine_alignment(out.feature, batch.labels, fine, theta);
        r.coarse = lc.loss.item();
        r.fine = lf.loss.item();
        total = loss::total_loss(sd, lc.loss, lf.loss, lambda, alpha);
    }
    r.total = total.item();
    if (!std::isfinite(r.total)) throw nd::NonFiniteError("train_step: total loss is not finite");
    nd::backward(total);
    optimizer.step();
    if (model.has_text()) model.temperature.clamp();
    r.tau = model.temperature.tau();
    return r;
}

std::vector<std::uint16_t> predict(model::ImageEncoder& image, const hsi::HsiCube& prepared,
                                   const std::vector<hsi::PixelIndex>& pixels, std::size_t batch) {
    const auto& ic = image.config();
    if (prepared.bands() != ic.bands) {
        throw std::invalid_argument("cube has " + std::to_string(prepared.bands()) + " bands, model expects " +
                                    std::to_string(ic.bands));
    }
    if (batch == 0) throw std::invalid_argument("predict: batch must be >= 1");
    const std::size_t s = ic.patch;
    const std::size_t per = ic.bands * s * s;
    nd::NoGradGuard no_grad;
    std::vector<std::uint16_t> out(pixels.size());
    for (std::size_t start = 0; start < pixels.size(); start += batch) {
        const std::size_t m = std::min(batch, pixels.size() - start);
        std::vector<double> buf(m * per);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
            const auto& px = pixels[start + i];
            hsi::extract_window(prepared, px.row, px.col, s, std::span<double>(buf.data() + i * per, per));
        }
        Tensor x = Tensor::from({m, 1, ic.bands, s, s}, std::move(buf));
        const auto res = image.forward(x, false, false);
        const auto p = res.probs.values();
        for (std::size_t i = 0; i < m; ++i) {
            const auto row = p.subspan(i * ic.classes, ic.classes);
            out[start + i] = static_cast<std::uint16_t>(std::max_element(row.begin(), row.end()) - row.begin() + 1);
        }
    }
    return out;
}

Metrics evaluate_pixels(model::ImageEncoder& image, const hsi::HsiCube& prepared,
                        const std::vector<hsi::PixelIndex>& pixels, std::size_t classes, std::size_t batch) {
    std::vector<std::vector<std::uint64_t>> confusion(classes, std::vector<std::uint64_t>(classes, 0));
    const auto pred = predict(image, prepared, pixels, batch);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        if (pixels[i].label == 0 || pixels[i].label > classes) {
            throw std::invalid_argument("label " + std::to_string(pixels[i].label) + " exceeds the model's " +
                                        std::to_string(classes) + " classes");
        }
        add_prediction(confusion, pixels[i].label - 1u, pred[i] - 1u);
    }
    return metrics_from_confusion(std::move(confusion));
}

Metrics evaluate(model::ImageEncoder& image, const hsi::HsiCube& cube, const hsi::LabelRaster& labels,
                 std::size_t batch) {
    const auto& ic = image.config();
    if (cube.bands() != ic.bands) {
        throw std::invalid_argument("target cube has " + std::to_string(cube.bands()) + " bands, model expects " +
                                    std::to_string(ic.bands));
    }
    if (cube.height() != labels.height() || cube.width() != labels.width()) {
        throw std::invalid_argument("target cube and label raster differ in size");
    }
    const auto prepared = prepare_cube(cube, ic.normalize);
    return evaluate_pixels(image, prepared, hsi::labeled_pixels(labels), ic.classes, batch);
}

hsi::LabelRaster classify_scene(model::ImageEncoder& image, const hsi::HsiCube& cube, const hsi::LabelRaster* mask,
                                std::size_t batch) {
    if (mask && (mask->height() != cube.height() || mask->width() != cube.width())) {
        throw std::invalid_argument("label mask and cube differ in size");
    }
    std::vector<hsi::PixelIndex> pixels;
    for (std::uint32_t r = 0; r < cube.height(); ++r)
        for (std::uint32_t c = 0; c < cube.width(); ++c)
            if (!mask || mask->at(r, c) != 0) pixels.push_back({r, c, 0});
    const auto prepared = prepare_cube(cube, image.config().normalize);
    const auto pred = predict(image, prepared, pixels, batch);
    hsi::LabelRaster out(cube.height(), cube.width());
    for (std::size_t i = 0; i < pixels.size(); ++i) out.at(pixels[i].row, pixels[i].col) = pred[i];
    return out;
}

FitResult fit(const hsi::Scene& source, const text::ClassCatalog& catalog, const TrainConfig& config,
              const ProgressFn& progress) {
    config.validate();
    hsi::check_scene(source, catalog.size());
    const SourceData data = prepare_source(source, config);
    const PromptSet prompts(catalog, text::train_bpe(text::prompt_corpus(catalog), static_cast<long>(config.bpe_merges)));

    FitResult res;
    LdgModel model = init_model(config, source.cube.bands(), prompts);
    Adam opt = make_optimizer(model, config);
    Rng rng(mix_seed(config.seed, kBatches));

    const auto validate = [&] {
        return evaluate_pixels(model.image, data.cube, data.split.val, catalog.size(), config.eval_batch);
    };
    res.val_metrics = validate();
    res.model = model.clone();
    res.best_epoch = 0;

    const std::size_t n_train = data.split.train.size();
    const std::size_t steps =
        config.steps_per_epoch ? config.steps_per_epoch : (n_train + config.batch_size - 1) / config.batch_size;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        double sum = 0.0;
        for (std::size_t k = 0; k < steps; ++k) {
            const Batch b = build_batch(data, prompts, config, rng);
            sum += train_step(model, b, prompts, config, opt).total;
        }
        const Metrics m = validate();
        EpochRecord rec{epoch, sum / static_cast<double>(steps), m.oa};
        res.history.push_back(rec);
        if (m.oa > res.val_metrics.oa) {
            res.val_metrics = m;
            res.model = model.clone();
            res.best_epoch = epoch;
        }
        if (progress) progress(rec);
    }
    return res;
}

GridResult grid_search(const hsi::Scene& source, const text::ClassCatalog& catalog, const TrainConfig& base,
                       const Grid& grid) {
    if (grid.learning_rate.empty() || grid.lambda.empty() || grid.alpha.empty()) {
        throw std::invalid_argument("grid_search: every grid axis needs at least one value");
    }
    using Key = std::tuple<double, double, double>;
    std::map<Key, double> cache;
    GridResult out;
    const auto run = [&](double lr, double lam, double a) {
        const Key k{lr, lam, a};
        if (auto it = cache.find(k); it != cache.end()) return it->second;
        TrainConfig c = base;
        c.learning_rate = lr;
        c.lambda = lam;
        c.alpha = a;
        const double oa = fit(source, catalog, c).val_metrics.oa;
        cache.emplace(k, oa);
        out.rows.push_back({lr, lam, a, oa});
        return oa;
    };
    // Higher OA wins; ties go to smaller eta, then lambda, then alpha.
    const auto better = [](const GridRow& x, const GridRow& y) {
        if (x.val_oa != y.val_oa) return x.val_oa > y.val_oa;
        return std::tie(x.learning_rate, x.lambda, x.alpha) < std::tie(y.learning_rate, y.lambda, y.alpha);
    };

    if (grid.cartesian) {
        for (double lr : grid.learning_rate)
            for (double lam : grid.lambda)
                for (double a : grid.alpha) run(lr, lam, a);
    } else {
        const auto start = [](const std::vector<double>& axis, double v) {
            return std::find(axis.begin(), axis.end(), v) != axis.end() ? v : axis.front();
        };
        double lr = start(grid.learning_rate, base.learning_rate);
        double lam = start(grid.lambda, base.lambda);
        double a = start(grid.alpha, base.alpha);
        const auto sweep = [&](const std::vector<double>& axis, double& slot) {
            GridRow best{};
            bool have = false;
            for (double v : axis) {
                slot = v;
                const GridRow row{lr, lam, a, run(lr, lam, a)};
                if (!have || better(row, best)) best = row, have = true;
            }
            lr = best.learning_rate, lam = best.lambda, a = best.alpha;
        };
        sweep(grid.learning_rate, lr);
        sweep(grid.lambda, lam);
        sweep(grid.alpha, a);
    }
    out.best = out.rows.front();
    for (const auto& r : out.rows)
        if (better(r, out.best)) out.best = r;
    return out;
}

std::vector<AblationRow> ablate(const hsi::DomainPair& pair, const text::ClassCatalog& catalog,
                                const TrainConfig& config) {
    pair.validate();
    std::vector<AblationRow> rows;
    for (Variant v : {Variant::cls, Variant::coarse, Variant::fine, Variant::full}) {
        TrainConfig c = config;
        c.variant = v;
        auto fr = fit(pair.source, catalog, c);
        Metrics t = evaluate(fr.model.image, pair.target.cube, pair.target.labels, c.eval_batch);
        rows.push_back({v, c.seed, fr.val_metrics.oa, std::move(t)});
    }
    return rows;
}

std::string grid_to_csv(const GridResult& g) {
    std::string s = "learning_rate,lambda,alpha,val_oa\n";
    for (const auto& r : g.rows)
        s += fmt(r.learning_rate) + "," + fmt(r.lambda) + "," + fmt(r.alpha) + "," + fmt(r.val_oa) + "\n";
    return s;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
    std::string s = "variant,seed,val_oa,oa,kappa\n";
    for (const auto& r : rows) {
        s += to_string(r.variant) + "," + std::to_string(r.seed) + "," + fmt(r.val_oa) + "," + fmt(r.target.oa) + "," +
             fmt(r.target.kappa) + "\n";
    }
    return s;
}

}  // namespace ldg::train
