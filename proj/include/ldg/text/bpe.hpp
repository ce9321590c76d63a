#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ldg::text {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr std::size_t kMaxSequence = 76;
inline constexpr std::size_t kDefaultMerges = 512;

/// Byte-level vocabulary: ids 0..255 are raw bytes, then one id per merge in
/// priority order, then START, END, PAD.
class BpeVocab {
public:
    BpeVocab() = default;
    explicit BpeVocab(std::vector<std::pair<TokenId, TokenId>> merges);

    const std::vector<std::pair<TokenId, TokenId>>& merges() const noexcept { return merges_; }
    std::size_t size() const noexcept { return 256 + merges_.size() + 3; }
    TokenId start_id() const noexcept { return static_cast<TokenId>(256 + merges_.size()); }
    TokenId end_id() const noexcept { return start_id() + 1; }
    TokenId pad_id() const noexcept { return start_id() + 2; }

    /// Bytes a non-special token expands to.
    const std::string& bytes(TokenId id) const { return bytes_.at(static_cast<std::size_t>(id)); }
    /// Merge priority of a pair, or -1 when the pair never merges.
    std::ptrdiff_t rank(TokenId a, TokenId b) const;

    bool operator==(const BpeVocab& o) const { return merges_ == o.merges_; }

private:
    std::vector<std::pair<TokenId, TokenId>> merges_;
    std::vector<std::string> bytes_;
    std::map<std::pair<TokenId, TokenId>, std::size_t> rank_;
};

std::string to_lower_ascii(std::string_view s);

/// Splits lower-cased text into word chunks; each chunk carries its leading spaces.
std::vector<std::string> pre_tokenize(std::string_view lowered);

/// Greedy most-frequent-pair merges; ties go to the lexicographically smaller
/// (left bytes, right bytes). Stops early once no pair is left.
BpeVocab train_bpe(const std::vector<std::string>& corpus, long merge_count);

/// START + merged bytes + END, truncated to kMaxSequence tokens with END kept last.
TokenSeq encode(const BpeVocab& vocab, std::string_view text);

/// Inverse of encode for untruncated input; specials are dropped. Throws std::out_of_range for id >= V.
std::string decode(const BpeVocab& vocab, const TokenSeq& seq);

/// Merge table as JSON text ([[a,b],...]) and back.
std::string vocab_to_json(const BpeVocab& vocab);
BpeVocab vocab_from_json(const std::string& json);

}  // namespace ldg::text
