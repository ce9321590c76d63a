#include "ldg/app/cli.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ldg/app/features.hpp"
#include "ldg/app/render.hpp"
#include "ldg/hsi/synth.hpp"
#include "ldg/model/model_io.hpp"
#include "ldg/text/prompts.hpp"
#include "ldg/train/trainer.hpp"
#include "ldg/util/fileio.hpp"

namespace ldg::app {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Paths {
    std::string src, labels, tgt, tgt_labels, meta, config, model, palette, out;
};

struct SynthArgs {
    std::uint64_t seed = 0;
    std::size_t classes = 5;
    std::size_t bands = 16;
    std::size_t size = 32;
    double noise = 0.05;
    std::vector<double> shift{1.1, 0.1, 0.05};
};

struct TrainOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<std::size_t> epochs;
};

text::ClassCatalog catalog_for(const Paths& p, std::size_t classes) {
    if (!p.meta.empty()) return text::load_class_meta(p.meta);
    return text::default_catalog(classes);
}

train::TrainConfig config_for(const Paths& p, const TrainOverrides& o) {
    train::TrainConfig c;
    if (!p.config.empty()) c = train::config_from_json(read_file(p.config));
    if (o.seed) c.seed = *o.seed;
    if (o.variant) c.variant = train::parse_variant(*o.variant);
    if (o.epochs) c.epochs = *o.epochs;
    c.validate();
    return c;
}

hsi::Scene load_scene(const std::string& cube, const std::string& labels) {
    hsi::Scene s{hsi::load_cube(cube), hsi::load_labels(labels)};
    if (s.cube.height() != s.labels.height() || s.cube.width() != s.labels.width()) {
        throw std::invalid_argument(cube + " and " + labels + " differ in size");
    }
    return s;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

int cmd_synth(const Paths& p, const SynthArgs& a, std::ostream& out) {
    if (a.shift.size() != 3) throw std::invalid_argument("--shift takes GAIN,OFFSET,NONLIN");
    hsi::SynthSpec spec;
    spec.classes = a.classes;
    spec.bands = a.bands;
    spec.source_height = spec.source_width = a.size;
    spec.target_height = spec.target_width = a.size;
    spec.noise_std = a.noise;
    spec.seed = a.seed;
    spec.shift = hsi::DomainShift::uniform(a.bands, a.shift[0], a.shift[1], a.shift[2]);
    const auto pair = hsi::generate_synthetic_pair(spec);

    const fs::path dir = p.out;
    hsi::save_pair(pair, dir);
    ordered_json rec;
    rec["seed"] = a.seed;
    rec["classes"] = a.classes;
    rec["bands"] = a.bands;
    rec["size"] = a.size;
    rec["noise_std"] = a.noise;
    rec["shift"] = {{"gain", a.shift[0]}, {"offset", a.shift[1]}, {"nonlinearity", a.shift[2]}};
    write_file_atomic(dir / "synth.json", rec.dump(2) + "\n");
    write_file_atomic(dir / "meta.json", text::class_meta_to_json(text::default_catalog(a.classes)));
    write_file_atomic(dir / "palette.json", palette_to_json(default_palette(a.classes)));
    out << "wrote " << dir.string() << "\n";
    return 0;
}

int cmd_train(const Paths& p, const TrainOverrides& o, std::ostream& out) {
    const auto scene = load_scene(p.src, p.labels);
    const auto cat = catalog_for(p, scene.labels.max_class());
    const auto cfg = config_for(p, o);
    const auto res = train::fit(scene, cat, cfg, [&](const train::EpochRecord& r) {
        out << "epoch " << r.epoch << " loss " << num(r.mean_total) << " val_oa " << num(r.val_oa) << "\n";
    });
    model::save_model(res.model, p.out, true);
    ordered_json summary;
    summary["seed"] = cfg.seed;
    summary["variant"] = train::to_string(cfg.variant);
    summary["best_epoch"] = res.best_epoch;
    summary["val"] = ordered_json::parse(train::metrics_to_json(res.val_metrics));
    out << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const Paths& p, std::size_t batch, std::ostream& out) {
    auto m = model::load_model(p.model);
    const auto scene = load_scene(p.tgt, p.labels);
    const auto metrics = train::evaluate(m.image, scene.cube, scene.labels, batch);
    const auto json = train::metrics_to_json(metrics);
    write_file_atomic(p.out, json + "\n");
    out << "oa " << num(metrics.oa) << " kappa " << num(metrics.kappa) << "\n";
    return 0;
}

int cmd_map(const Paths& p, std::size_t batch, std::ostream& out) {
    auto m = model::load_model(p.model);
    const auto cube = hsi::load_cube(p.tgt);
    std::optional<hsi::LabelRaster> mask;
    if (!p.labels.empty()) mask = hsi::load_labels(p.labels);
    const auto palette = p.palette.empty() ? default_palette(m.image.config().classes) : parse_palette(read_file(p.palette));
    const auto ids = train::classify_scene(m.image, cube, mask ? &*mask : nullptr, batch);
    write_file_atomic(p.out, render_map(ids, palette));
    out << "wrote " << p.out << "\n";
    return 0;
}

int cmd_grid(const Paths& p, const TrainOverrides& o, const train::Grid& grid, std::ostream& out) {
    const auto scene = load_scene(p.src, p.labels);
    const auto cat = catalog_for(p, scene.labels.max_class());
    const auto res = train::grid_search(scene, cat, config_for(p, o), grid);
    write_file_atomic(p.out, train::grid_to_csv(res));
    out << "best learning_rate " << num(res.best.learning_rate) << " lambda " << num(res.best.lambda) << " alpha "
        << num(res.best.alpha) << " val_oa " << num(res.best.val_oa) << "\n";
    return 0;
}

int cmd_ablate(const Paths& p, const TrainOverrides& o, std::size_t seeds, std::ostream& out) {
    hsi::DomainPair pair;
    pair.source = load_scene(p.src, p.labels);
    pair.target = load_scene(p.tgt, p.tgt_labels);
    pair.classes = std::max(pair.source.labels.max_class(), pair.target.labels.max_class());
    const auto cat = catalog_for(p, pair.classes);
    auto cfg = config_for(p, o);
    std::vector<train::AblationRow> rows;
    std::map<std::string, double> mean_oa;
    const std::uint64_t first = cfg.seed;
    for (std::size_t k = 0; k < seeds; ++k) {
        cfg.seed = first + k;
        for (auto& r : train::ablate(pair, cat, cfg)) {
            mean_oa[train::to_string(r.variant)] += r.target.oa / static_cast<double>(seeds);
            rows.push_back(std::move(r));
        }
    }
    write_file_atomic(p.out, train::ablation_to_csv(rows));
    for (const auto& [v, oa] : mean_oa) out << v << " mean_oa " << num(oa) << "\n";
    return 0;
}

int cmd_features(const Paths& p, std::size_t batch, std::ostream& out) {
    auto m = model::load_model(p.model);
    const auto scene = load_scene(p.tgt, p.labels);
    write_file_atomic(p.out, export_features(m.image, scene.cube, scene.labels, batch));
    out << "wrote " << p.out << "\n";
    return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Language-guided hyperspectral domain generalization toolkit", "ldgnet"};
    app.require_subcommand(1, 1);

    Paths p;
    SynthArgs sa;
    TrainOverrides ov;
    train::Grid grid;
    std::size_t seeds = 1, batch = 256;

    const auto add_overrides = [&](CLI::App* c) {
        c->add_option("--seed", ov.seed, "Override the config seed");
        c->add_option("--variant", ov.variant, "Override the variant (full, cls, coarse, fine)");
        c->add_option("--epochs", ov.epochs, "Override the epoch count");
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic source/target scene pair");
    synth->add_option("--out", p.out, "Output directory")->required();
    synth->add_option("--seed", sa.seed, "Generator seed");
    synth->add_option("--classes", sa.classes, "Class count")->check(CLI::Range(1, 1000));
    synth->add_option("--bands", sa.bands, "Band count")->check(CLI::Range(1, 4096));
    synth->add_option("--size", sa.size, "Height and width of each scene")->check(CLI::Range(1, 4096));
    synth->add_option("--noise", sa.noise, "Per-pixel spectral noise std");
    synth->add_option("--shift", sa.shift, "Target shift GAIN,OFFSET,NONLIN")->delimiter(',')->expected(3);

    auto* trn = app.add_subcommand("train", "Train on a labeled source scene");
    trn->add_option("--src", p.src, "Source cube")->required()->check(CLI::ExistingFile);
    trn->add_option("--labels", p.labels, "Source labels")->required()->check(CLI::ExistingFile);
    trn->add_option("--meta", p.meta, "Class metadata JSON")->check(CLI::ExistingFile);
    trn->add_option("--config", p.config, "Training config JSON")->check(CLI::ExistingFile);
    trn->add_option("--out", p.out, "Model file")->required();
    add_overrides(trn);

    auto* evl = app.add_subcommand("eval", "Evaluate a model on a labeled target scene");
    evl->add_option("--model", p.model, "Model file")->required()->check(CLI::ExistingFile);
    evl->add_option("--tgt", p.tgt, "Target cube")->required()->check(CLI::ExistingFile);
    evl->add_option("--labels", p.labels, "Target labels")->required()->check(CLI::ExistingFile);
    evl->add_option("--out", p.out, "Metrics JSON")->required();
    evl->add_option("--batch", batch, "Inference batch size")->check(CLI::PositiveNumber);

    auto* map = app.add_subcommand("map", "Render a classification map as PPM");
    map->add_option("--model", p.model, "Model file")->required()->check(CLI::ExistingFile);
    map->add_option("--tgt", p.tgt, "Target cube")->required()->check(CLI::ExistingFile);
    map->add_option("--palette", p.palette, "Palette JSON")->check(CLI::ExistingFile);
    map->add_option("--labels", p.labels, "Only classify pixels labeled here")->check(CLI::ExistingFile);
    map->add_option("--out", p.out, "PPM file")->required();
    map->add_option("--batch", batch, "Inference batch size")->check(CLI::PositiveNumber);

    auto* grd = app.add_subcommand("grid", "Hyperparameter search by validation OA");
    grd->add_option("--src", p.src, "Source cube")->required()->check(CLI::ExistingFile);
    grd->add_option("--labels", p.labels, "Source labels")->required()->check(CLI::ExistingFile);
    grd->add_option("--meta", p.meta, "Class metadata JSON")->check(CLI::ExistingFile);
    grd->add_option("--config", p.config, "Base training config JSON")->check(CLI::ExistingFile);
    grd->add_option("--out", p.out, "CSV table")->required();
    grd->add_option("--lr", grid.learning_rate, "Learning-rate axis")->delimiter(',');
    grd->add_option("--lambda", grid.lambda, "Lambda axis")->delimiter(',');
    grd->add_option("--alpha", grid.alpha, "Alpha axis")->delimiter(',');
    grd->add_flag("--cartesian", grid.cartesian, "Evaluate the full product");
    add_overrides(grd);

    auto* abl = app.add_subcommand("ablate", "Train every variant and score it on the target");
    abl->add_option("--src", p.src, "Source cube")->required()->check(CLI::ExistingFile);
    abl->add_option("--labels", p.labels, "Source labels")->required()->check(CLI::ExistingFile);
    abl->add_option("--tgt", p.tgt, "Target cube")->required()->check(CLI::ExistingFile);
    abl->add_option("--tgt-labels", p.tgt_labels, "Target labels")->required()->check(CLI::ExistingFile);
    abl->add_option("--meta", p.meta, "Class metadata JSON")->check(CLI::ExistingFile);
    abl->add_option("--config", p.config, "Training config JSON")->check(CLI::ExistingFile);
    abl->add_option("--out", p.out, "CSV table")->required();
    abl->add_option("--seeds", seeds, "Consecutive seeds starting at the config seed")->check(CLI::PositiveNumber);
    add_overrides(abl);

    auto* feat = app.add_subcommand("export-features", "Write semantic features of labeled pixels as CSV");
    feat->add_option("--model", p.model, "Model file")->required()->check(CLI::ExistingFile);
    feat->add_option("--tgt", p.tgt, "Cube")->required()->check(CLI::ExistingFile);
    feat->add_option("--labels", p.labels, "Labels")->required()->check(CLI::ExistingFile);
    feat->add_option("--out", p.out, "CSV file")->required();
    feat->add_option("--batch", batch, "Inference batch size")->check(CLI::PositiveNumber);

    // CLI11 reports missing required options before unexpected ones; name unknown flags first.
    if (argc > 1) {
        CLI::App* sub = nullptr;
        for (auto* s : app.get_subcommands({}))
            if (s->get_name() == argv[1]) sub = s;
        for (int i = 2; sub && i < argc; ++i) {
            std::string a = argv[i];
            if (a.size() < 2 || a[0] != '-' || std::isdigit(static_cast<unsigned char>(a[1])) || a[1] == '.') continue;
            a = a.substr(0, a.find('='));
            if (a == "--help" || a == "-h") continue;
            if (!sub->get_option_no_throw(a)) {
                err << "error: unknown option " << a << " for '" << argv[1] << "'\n";
                return 2;
            }
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return e.get_exit_code() ? e.get_exit_code() : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(p, sa, out);
        if (trn->parsed()) return cmd_train(p, ov, out);
        if (evl->parsed()) return cmd_eval(p, batch, out);
        if (map->parsed()) return cmd_map(p, batch, out);
        if (grd->parsed()) return cmd_grid(p, ov, grid, out);
        if (abl->parsed()) return cmd_ablate(p, ov, seeds, out);
        if (feat->parsed()) return cmd_features(p, batch, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace ldg::app
