#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ldg/model/image_encoder.hpp"
#include "ldg/model/losses.hpp"
#include "ldg/model/model_io.hpp"
#include "ldg/model/text_encoder.hpp"
#include "ldg/nd/grad_check.hpp"
#include "ldg/nd/ops.hpp"
#include "ldg/text/bpe.hpp"
#include "ldg/text/prompts.hpp"
#include "ldg/util/binio.hpp"

using namespace ldg;
using namespace ldg::model;
using namespace ldg::nd;
using Labels = std::vector<std::uint16_t>;

namespace {

Tensor random_input(Rng& rng, Shape shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform();
    return Tensor::from(std::move(shape), std::move(v));
}

ImageEncoderConfig toy_image() {
    ImageEncoderConfig c;
    c.patch = 5;
    c.bands = 4;
    c.widths = {2, 2};
    c.d_sem = 3;
    c.classes = 3;
    return c;
}

bool same_values(const ParamList& a, const ParamList& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name) return false;
        const auto x = a[i].tensor.values(), y = b[i].tensor.values();
        if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
    }
    return true;
}

void zero(Tensor& t) {
    for (auto& v : t.mutable_values()) v = 0.0;
}

}  // namespace

TEST_CASE("image encoder construction") {
    ImageEncoderConfig c;
    c.patch = 13;
    c.bands = 48;
    c.widths = {8, 16};
    c.d_sem = 64;
    c.classes = 7;
    CHECK(same_values(ImageEncoder(c, 4).parameters(), ImageEncoder(c, 4).parameters()));
    CHECK_FALSE(same_values(ImageEncoder(c, 4).parameters(), ImageEncoder(c, 5).parameters()));

    ImageEncoder enc(c, 1);
    Rng rng(2);
    const ImageOutput out = enc.forward(random_input(rng, {2, 1, 48, 13, 13}), false);
    CHECK(out.logits.shape() == Shape{2, 7});
    CHECK(out.feature.shape() == Shape{2, 64});

    ImageEncoderConfig bad = c;
    bad.patch = 3;
    CHECK_THROWS_AS(ImageEncoder(bad, 0), std::invalid_argument);
    bad = c;
    bad.patch = 12;
    CHECK_THROWS_AS(ImageEncoder(bad, 0), std::invalid_argument);
    bad = c;
    bad.bands = 3;
    CHECK_THROWS_AS(ImageEncoder(bad, 0), std::invalid_argument);
    bad = c;
    bad.d_sem = 1;
    CHECK_THROWS_AS(ImageEncoder(bad, 0), std::invalid_argument);
    CHECK_THROWS_AS(enc.forward(random_input(rng, {1, 1, 48, 11, 11}), false), ShapeError);
}

TEST_CASE("residual block") {
    Rng rng(3);
    ResidualBlock b = ResidualBlock::make(1, 2, 3, rng);
    const Tensor x = random_input(rng, {2, 1, 4, 5, 5});
    SUBCASE("shape is preserved under same padding") {
        CHECK(b.forward(x, true).shape() == Shape{2, 2, 4, 5, 5});
    }
    SUBCASE("zeroed branch leaves relu of the skip") {
        zero(b.conv3_weight);
        zero(b.conv3_bias);
        const Tensor out = b.forward(x, false);
        const Tensor skip = b.cbr1.forward(x, false);
        for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == skip[i]);
        for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] >= 0.0);
    }
    SUBCASE("gradient of the block sum") {
        const ParamList params = {{"w1", b.cbr1.weight}, {"b1", b.cbr1.bias},  {"g1", b.cbr1.gamma},
                                  {"w2", b.cbr2.weight}, {"be2", b.cbr2.beta}, {"w3", b.conv3_weight},
                                  {"b3", b.conv3_bias}};
        std::vector<Tensor> ts;
        for (auto& p : params) ts.push_back(p.tensor);
        const auto r = finite_diff_check([&] { return sum(b.forward(x, false)); }, ts, 1e-6);
        CHECK(r.max_rel_error < 1e-4);
        const auto rt = finite_diff_check([&] { return sum(b.forward(x, true)); }, ts, 1e-6, 12);
        CHECK(rt.max_rel_error < 1e-4);
    }
}

TEST_CASE("encode_image outputs") {
    ImageEncoder enc(toy_image(), 7);
    Rng rng(8);
    const Tensor x = random_input(rng, {4, 1, 4, 5, 5});
    enc.forward(x, true);  // moves the running statistics away from their start
    const ImageOutput out = enc.forward(x, false);
    for (std::size_t i = 0; i < 4; ++i) {
        double ps = 0.0, fs = 0.0;
        for (std::size_t k = 0; k < 3; ++k) ps += out.probs[i * 3 + k];
        for (std::size_t k = 0; k < 3; ++k) fs += out.feature[i * 3 + k] * out.feature[i * 3 + k];
        CHECK(std::abs(ps - 1.0) < 1e-12);
        CHECK(std::abs(std::sqrt(fs) - 1.0) < 1e-6);
    }
    SUBCASE("eval mode ignores batch context") {
        std::vector<double> a(x.values().begin(), x.values().begin() + 100);
        const Tensor alone = Tensor::from({1, 1, 4, 5, 5}, a);
        const Tensor other = random_input(rng, {3, 1, 4, 5, 5});
        std::vector<double> mixed(other.values().begin(), other.values().end());
        mixed.insert(mixed.begin() + 200, a.begin(), a.end());
        const ImageOutput o1 = enc.forward(alone, false);
        const ImageOutput o2 = enc.forward(Tensor::from({4, 1, 4, 5, 5}, mixed), false);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(o1.logits[k] == o2.logits[2 * 3 + k]);
            CHECK(o1.feature[k] == o2.feature[2 * 3 + k]);
        }
    }
    SUBCASE("end-to-end gradient of the source loss") {
        std::vector<Tensor> ts;
        for (auto& p : enc.parameters()) ts.push_back(p.tensor);
        const Labels y{0, 2, 1, 2};
        const auto r = finite_diff_check(
            [&] { return loss::classification_loss_sd(enc.forward(x, true, false).logits, y); }, ts, 1e-6, 6);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("text encoder construction") {
    TextEncoderConfig c;
    c.vocab = 300;
    CHECK(same_values(TextEncoder(c, 1).parameters(), TextEncoder(c, 1).parameters()));
    TextEncoderConfig bad = c;
    bad.width = 8;
    bad.heads = 3;
    CHECK_THROWS_AS(TextEncoder(bad, 0), std::invalid_argument);

    SUBCASE("3 x 512 parameter count") {
        TextEncoderConfig big;
        big.layers = 3;
        big.width = 512;
        big.heads = 8;
        big.vocab = 49152;
        big.d_sem = 512;
        const double n = static_cast<double>(count_values(TextEncoder(big, 0).parameters()));
        CHECK(std::abs(n - 33e6) / 33e6 < 0.10);
    }
}

TEST_CASE("encode_text") {
    const auto catalog = text::default_catalog(7);
    const auto vocab = text::train_bpe(text::prompt_corpus(catalog), 200);
    TextEncoderConfig c;
    c.layers = 2;
    c.width = 16;
    c.heads = 2;
    c.d_sem = 8;
    c.vocab = vocab.size();
    const TextEncoder enc(c, 11);
    const auto E = vocab.end_id(), P = vocab.pad_id();
    const auto feat = [&](const std::string& s) { return enc.encode(text::encode(vocab, s), E, P); };

    const Tensor f = feat("The trees appear as small circles");
    double n2 = 0.0;
    for (double v : f.values()) n2 += v * v;
    CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-6);

    const Tensor g = feat("THE TREES appear AS small circles");
    for (std::size_t i = 0; i < 8; ++i) CHECK(f[i] == g[i]);

    SUBCASE("padding after END is invisible") {
        auto seq = text::encode(vocab, "water has a smooth surface");
        const Tensor a = enc.encode(seq, E, P);
        seq.insert(seq.end(), 9, P);
        const Tensor b = enc.encode(seq, E, P);
        for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
    }
    SUBCASE("token order matters") {
        const Tensor a = feat("trees beside road"), b = feat("road beside trees");
        double diff = 0.0;
        for (std::size_t i = 0; i < 8; ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
        CHECK(diff > 1e-6);
    }
    SUBCASE("missing END") {
        CHECK_THROWS_AS(enc.encode({vocab.start_id(), 'a'}, E, P), std::invalid_argument);
    }
    SUBCASE("causal variant also works") {
        TextEncoderConfig cc = c;
        cc.causal = true;
        const TextEncoder causal(cc, 11);
        auto seq = text::encode(vocab, "water");
        const Tensor a = causal.encode(seq, E, P);
        seq.insert(seq.end(), 3, P);
        const Tensor b = causal.encode(seq, E, P);
        for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-10);
    }
}

TEST_CASE("alignment gradient through the text encoder") {
    const auto catalog = text::default_catalog(3);
    const auto vocab = text::train_bpe(text::prompt_corpus(catalog), 40);
    TextEncoderConfig c;
    c.layers = 1;
    c.width = 16;
    c.heads = 2;
    c.d_sem = 4;
    c.vocab = vocab.size();
    const TextEncoder enc(c, 2);
    std::vector<text::TokenSeq> seqs;
    for (const auto& m : catalog.classes) seqs.push_back(text::encode(vocab, text::build_coarse_prompt(m, catalog.coarse_template)));
    Rng rng(4);
    std::vector<double> v(12);
    for (auto& x : v) x = rng.normal();
    const Tensor visual = l2_normalize(Tensor::from({3, 4}, v));
    const Tensor theta = Tensor::from({1}, {1.0}, true);
    std::vector<Tensor> ts;
    for (auto& p : enc.parameters()) ts.push_back(p.tensor);
    ts.push_back(theta);
    const auto r = finite_diff_check(
        [&] {
            const Tensor t = enc.encode_all(seqs, vocab.end_id(), vocab.pad_id());
            return loss::coarse_alignment(visual, Labels{1, 2, 3}, t, theta).loss;
        },
        ts, 1e-6, 8);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("model file") {
    LdgModel m;
    m.image = ImageEncoder(toy_image(), 3);
    const auto catalog = text::default_catalog(3);
    m.vocab = text::train_bpe(text::prompt_corpus(catalog), 30);
    TextEncoderConfig tc;
    tc.layers = 1;
    tc.width = 8;
    tc.heads = 2;
    tc.d_sem = 3;
    tc.vocab = m.vocab->size();
    m.text = TextEncoder(tc, 4);
    Rng rng(5);
    m.image.forward(random_input(rng, {3, 1, 4, 5, 5}), true);

    const auto dir = std::filesystem::temp_directory_path() / "ldg_test_model";
    std::filesystem::create_directories(dir);

    SUBCASE("full round trip at float precision") {
        save_model(m, dir / "full.ldgm");
        const LdgModel back = load_model(dir / "full.ldgm");
        REQUIRE(back.has_text());
        CHECK(*back.vocab == *m.vocab);
        const auto a = m.image.state(), b = back.image.state();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t k = 0; k < a[i].tensor.numel(); ++k)
                CHECK(b[i].tensor[k] == static_cast<double>(static_cast<float>(a[i].tensor[k])));
        CHECK(back.temperature.theta.item() == static_cast<double>(static_cast<float>(m.temperature.theta.item())));
        // A second pass is exact: values are already float-representable.
        CHECK(encode_model(back) == encode_model(load_model(dir / "full.ldgm")));
    }
    SUBCASE("inference without text tensors") {
        save_model(m, dir / "full.ldgm");
        save_model(m, dir / "img.ldgm", false);
        LdgModel full = load_model(dir / "full.ldgm");
        LdgModel img = load_model(dir / "img.ldgm");
        CHECK_FALSE(img.has_text());
        for (const auto& e : decode_tensors(encode_model(m, false))) CHECK(e.name.rfind("txt.", 0) != 0);
        const Tensor x = random_input(rng, {2, 1, 4, 5, 5});
        const ImageOutput a = full.image.forward(x, false), b = img.image.forward(x, false);
        for (std::size_t i = 0; i < a.logits.numel(); ++i) CHECK(a.logits[i] == b.logits[i]);
    }
    SUBCASE("format errors") {
        const std::string good = encode_model(m);
        CHECK_THROWS_AS(decode_model("LDGM2\n" + good.substr(6)), FormatError);
        CHECK_THROWS_AS(decode_model(good.substr(0, good.size() - 4)), FormatError);
        CHECK_THROWS_AS(decode_model(good + "xxxx"), FormatError);
        CHECK_THROWS_AS(decode_model(encode_tensors({{"img.arch", Tensor::from({2}, {5, 4})}})), FormatError);
    }
    SUBCASE("clone is deep") {
        LdgModel c = m.clone();
        c.image.final_weight().mutable_values()[0] += 1.0;
        CHECK(c.image.final_weight()[0] != m.image.final_weight()[0]);
        CHECK(count_values(c.parameters()) == count_values(m.parameters()));
    }
}
