#include "ldg/text/prompts.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "ldg/util/fileio.hpp"

namespace ldg::text {

namespace {

constexpr std::string_view kPlaceholder = "{class}";

struct BuiltinClass {
    const char* name;
    const char* fine[2];
};

constexpr BuiltinClass kBuiltin[] = {
    {"Grass healthy", {"The grass healthy is next to the road", "The grass healthy is dark green"}},
    {"Grass stressed", {"The grass stressed is next to the road", "The grass stressed is pale green"}},
    {"Trees",
     {"The trees are next to residential buildings or non-residential buildings", "The trees appear as small circles"}},
    {"Water", {"The water has a smooth surface", "The water appears dark blue or black"}},
    {"Residential buildings",
     {"Residential buildings are densely packed", "Residential buildings appear as small blocks"}},
    {"Non-residential buildings",
     {"The shapes of the non-residential buildings are inconsistent",
      "Non-residential buildings appear as large blocks"}},
    {"Road", {"Trees grew along the road", "The road appear as elongated strip shape"}},
};

}  // namespace

std::string build_coarse_prompt(const ClassMeta& meta, std::string_view templ) {
    const auto pos = templ.find(kPlaceholder);
    if (pos == std::string_view::npos) throw std::invalid_argument("template has no {class} placeholder");
    if (templ.find(kPlaceholder, pos + 1) != std::string_view::npos) {
        throw std::invalid_argument("template has more than one {class} placeholder");
    }
    std::string out(templ.substr(0, pos));
    out += meta.name;
    out += templ.substr(pos + kPlaceholder.size());
    return out;
}

void validate_catalog(ClassCatalog& catalog) {
    if (catalog.classes.empty()) throw std::invalid_argument("class metadata lists no classes");
    {
        ClassMeta probe;
        probe.name = "x";
        build_coarse_prompt(probe, catalog.coarse_template);
    }
    std::set<std::uint16_t> seen;
    for (const auto& c : catalog.classes) {
        if (!seen.insert(c.id).second) throw std::invalid_argument("duplicate class id " + std::to_string(c.id));
        if (c.name.empty()) throw std::invalid_argument("class " + std::to_string(c.id) + " has an empty name");
        for (const auto& f : c.fine)
            if (f.empty()) throw std::invalid_argument("class " + std::to_string(c.id) + " has an empty fine text");
    }
    std::sort(catalog.classes.begin(), catalog.classes.end(),
              [](const ClassMeta& a, const ClassMeta& b) { return a.id < b.id; });
    for (std::size_t k = 0; k < catalog.classes.size(); ++k) {
        if (catalog.classes[k].id != k + 1) {
            throw std::invalid_argument("class ids must be dense 1.." + std::to_string(catalog.classes.size()));
        }
    }
}

ClassCatalog parse_class_meta(const std::string& json) {
    const auto j = nlohmann::json::parse(json);
    ClassCatalog cat;
    cat.coarse_template = j.value("coarse_template", std::string(kDefaultTemplate));
    for (const auto& c : j.at("classes")) {
        ClassMeta m;
        const auto id = c.at("id").get<long>();
        if (id < 1 || id > 65535) throw std::invalid_argument("class id out of range: " + std::to_string(id));
        m.id = static_cast<std::uint16_t>(id);
        m.name = c.at("name").get<std::string>();
        const auto& fine = c.at("fine");
        if (!fine.is_array() || fine.size() != 2) {
            throw std::invalid_argument("class " + std::to_string(id) + " needs exactly two fine texts");
        }
        m.fine = {fine[0].get<std::string>(), fine[1].get<std::string>()};
        cat.classes.push_back(std::move(m));
    }
    validate_catalog(cat);
    return cat;
}

ClassCatalog load_class_meta(const std::filesystem::path& path) { return parse_class_meta(read_file(path)); }

std::string class_meta_to_json(const ClassCatalog& catalog) {
    nlohmann::ordered_json j;
    j["coarse_template"] = catalog.coarse_template;
    j["classes"] = nlohmann::ordered_json::array();
    for (const auto& c : catalog.classes) {
        nlohmann::ordered_json e;
        e["id"] = c.id;
        e["name"] = c.name;
        e["fine"] = {c.fine[0], c.fine[1]};
        j["classes"].push_back(e);
    }
    return j.dump(2) + "\n";
}

std::vector<std::string> prompt_corpus(const ClassCatalog& catalog) {
    std::vector<std::string> out;
    for (const auto& c : catalog.classes) {
        out.push_back(build_coarse_prompt(c, catalog.coarse_template));
        out.push_back(c.fine[0]);
        out.push_back(c.fine[1]);
    }
    return out;
}

ClassCatalog default_catalog(std::size_t classes) {
    ClassCatalog cat;
    constexpr std::size_t n_builtin = std::size(kBuiltin);
    for (std::size_t k = 0; k < classes; ++k) {
        ClassMeta m;
        m.id = static_cast<std::uint16_t>(k + 1);
        if (classes <= n_builtin) {
            m.name = kBuiltin[k].name;
            m.fine = {kBuiltin[k].fine[0], kBuiltin[k].fine[1]};
        } else {
            m.name = "material " + std::to_string(k + 1);
            m.fine = {"material " + std::to_string(k + 1) + " has its own spectral signature",
                      "material " + std::to_string(k + 1) + " forms compact regions"};
        }
        cat.classes.push_back(std::move(m));
    }
    validate_catalog(cat);
    return cat;
}

}  // namespace ldg::text
