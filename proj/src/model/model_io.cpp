#include "ldg/model/model_io.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "ldg/util/binio.hpp"
#include "ldg/util/fileio.hpp"

namespace ldg::model {

namespace {

constexpr std::string_view kMagic = "LDGM1\n";

Tensor arch_tensor(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor::from({n}, std::move(v));
}

std::size_t arch_at(const Tensor& t, std::size_t i) {
    if (i >= t.numel()) throw FormatError("architecture record too short");
    const double v = t[i];
    if (v < 0 || v != std::floor(v)) throw FormatError("architecture record holds a non-integer");
    return static_cast<std::size_t>(v);
}

Tensor copy_leaf(const Tensor& t, bool grad) {
    return Tensor::from(t.shape(), std::vector<double>(t.values().begin(), t.values().end()), grad);
}

}  // namespace

LdgModel LdgModel::clone() const {
    LdgModel m;
    m.image = ImageEncoder(image.config(), 0);
    m.image.load_state(image.state());
    if (text) {
        m.text = TextEncoder(text->config(), 0);
        m.text->load_state(text->parameters());
    }
    m.vocab = vocab;
    m.temperature.theta = copy_leaf(temperature.theta, true);
    return m;
}

ParamList LdgModel::parameters() const {
    ParamList p = image.parameters();
    if (text) {
        for (auto& e : text->parameters()) p.push_back(std::move(e));
        p.push_back({"txt.log_scale", temperature.theta});
    }
    return p;
}

std::string encode_tensors(const ParamList& tensors) {
    nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
    std::string payload;
    for (const auto& [name, t] : tensors) {
        nlohmann::ordered_json e;
        e["name"] = name;
        e["shape"] = t.shape();
        e["byte_offset"] = payload.size();
        manifest.push_back(std::move(e));
        for (const double v : t.values()) put_le(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return std::string(kMagic) + manifest.dump() + "\n" + payload;
}

ParamList decode_tensors(const std::string& bytes) {
    const Framed f = split_frame(bytes, kMagic);
    if (!f.header.is_array()) throw FormatError("model manifest is not a JSON array");
    ParamList out;
    std::size_t expected_offset = 0;
    for (const auto& e : f.header) {
        if (!e.contains("name") || !e.contains("shape") || !e.contains("byte_offset")) {
            throw FormatError("manifest entry needs name, shape and byte_offset");
        }
        const auto name = e["name"].get<std::string>();
        const auto shape = e["shape"].get<Shape>();
        const auto offset = e["byte_offset"].get<std::size_t>();
        if (offset != expected_offset) throw FormatError("tensor " + name + " has a non-contiguous byte_offset");
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        if (offset + 4 * n > f.payload.size()) {
            throw FormatError("truncated payload: tensor " + name + " runs past the end of the file");
        }
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = std::bit_cast<float>(get_le<std::uint32_t>(f.payload.data() + offset + 4 * i));
        }
        out.push_back({name, Tensor::from(shape, std::move(v))});
        expected_offset = offset + 4 * n;
    }
    check_payload(f.payload.size(), expected_offset);
    return out;
}

std::string encode_model(const LdgModel& model, bool include_text) {
    const auto& ic = model.image.config();
    ParamList all;
    all.push_back({"img.arch", arch_tensor({double(ic.patch), double(ic.bands), double(ic.classes), double(ic.d_sem),
                                            double(ic.widths[0]), double(ic.widths[1]), double(ic.kernel),
                                            ic.normalize ? 1.0 : 0.0})});
    for (auto& e : model.image.state()) all.push_back(std::move(e));
    if (include_text && model.text) {
        const auto& tc = model.text->config();
        all.push_back({"txt.arch", arch_tensor({double(tc.layers), double(tc.width), double(tc.heads), double(tc.max_len),
                                                double(tc.vocab), double(tc.d_sem), tc.causal ? 1.0 : 0.0})});
        if (model.vocab && !model.vocab->merges().empty()) {
            std::vector<double> m;
            for (const auto& [a, b] : model.vocab->merges()) m.insert(m.end(), {double(a), double(b)});
            all.push_back({"txt.merges", Tensor::from({model.vocab->merges().size(), 2}, std::move(m))});
        }
        for (auto& e : model.text->parameters()) all.push_back(std::move(e));
        all.push_back({"txt.log_scale", model.temperature.theta});
    }
    return encode_tensors(all);
}

LdgModel decode_model(const std::string& bytes) {
    const ParamList all = decode_tensors(bytes);
    std::map<std::string, const Tensor*> by_name;
    for (const auto& e : all) by_name[e.name] = &e.tensor;
    const auto get = [&](const std::string& name) -> const Tensor& {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("model file lacks tensor " + name);
        return *it->second;
    };

    LdgModel m;
    const Tensor& ia = get("img.arch");
    ImageEncoderConfig ic;
    ic.patch = arch_at(ia, 0);
    ic.bands = arch_at(ia, 1);
    ic.classes = arch_at(ia, 2);
    ic.d_sem = arch_at(ia, 3);
    ic.widths = {arch_at(ia, 4), arch_at(ia, 5)};
    ic.kernel = arch_at(ia, 6);
    ic.normalize = arch_at(ia, 7) != 0;
    m.image = ImageEncoder(ic, 0);
    m.image.load_state(all);

    if (by_name.count("txt.arch")) {
        const Tensor& ta = get("txt.arch");
        TextEncoderConfig tc;
        tc.layers = arch_at(ta, 0);
        tc.width = arch_at(ta, 1);
        tc.heads = arch_at(ta, 2);
        tc.max_len = arch_at(ta, 3);
        tc.vocab = arch_at(ta, 4);
        tc.d_sem = arch_at(ta, 5);
        tc.causal = arch_at(ta, 6) != 0;
        m.text = TextEncoder(tc, 0);
        m.text->load_state(all);
        std::vector<std::pair<text::TokenId, text::TokenId>> merges;
        if (by_name.count("txt.merges")) {
            const Tensor& mt = get("txt.merges");
            for (std::size_t k = 0; k + 1 < mt.numel(); k += 2) {
                merges.emplace_back(static_cast<text::TokenId>(arch_at(mt, k)),
                                    static_cast<text::TokenId>(arch_at(mt, k + 1)));
            }
        }
        m.vocab = text::BpeVocab(std::move(merges));
        m.temperature.theta = copy_leaf(get("txt.log_scale"), true);
    }
    return m;
}

void save_model(const LdgModel& model, const std::filesystem::path& path, bool include_text) {
    write_file_atomic(path, encode_model(model, include_text));
}

LdgModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace ldg::model
