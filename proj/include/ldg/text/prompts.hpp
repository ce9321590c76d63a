#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ldg::text {

inline constexpr std::string_view kDefaultTemplate = "A hyperspectral image of {class}";

struct ClassMeta {
    std::uint16_t id = 0;
    std::string name;
    std::array<std::string, 2> fine;
};

struct ClassCatalog {
    std::string coarse_template{kDefaultTemplate};
    std::vector<ClassMeta> classes;  // sorted by id, ids 1..C

    std::size_t size() const noexcept { return classes.size(); }
    const ClassMeta& at(std::uint16_t id) const { return classes.at(id - 1u); }
};

/// Substitutes the single "{class}" placeholder; throws std::invalid_argument otherwise.
std::string build_coarse_prompt(const ClassMeta& meta, std::string_view templ);

/// Sorts by id and checks density, uniqueness and non-empty texts.
void validate_catalog(ClassCatalog& catalog);

ClassCatalog parse_class_meta(const std::string& json);
ClassCatalog load_class_meta(const std::filesystem::path& path);
std::string class_meta_to_json(const ClassCatalog& catalog);

/// Every coarse prompt and fine text; the tokenizer is trained on this.
std::vector<std::string> prompt_corpus(const ClassCatalog& catalog);

/// Generic names and descriptions for synthetic scenes with more classes than the built-in list.
ClassCatalog default_catalog(std::size_t classes);

}  // namespace ldg::text
