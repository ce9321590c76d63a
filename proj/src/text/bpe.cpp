#include "ldg/text/bpe.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace ldg::text {

BpeVocab::BpeVocab(std::vector<std::pair<TokenId, TokenId>> merges) : merges_(std::move(merges)) {
    bytes_.reserve(256 + merges_.size());
    for (int b = 0; b < 256; ++b) bytes_.emplace_back(1, static_cast<char>(b));
    for (std::size_t k = 0; k < merges_.size(); ++k) {
        const auto [a, b] = merges_[k];
        const auto limit = static_cast<TokenId>(bytes_.size());
        if (a < 0 || b < 0 || a >= limit || b >= limit) {
            throw std::invalid_argument("merge " + std::to_string(k) + " refers to a later token");
        }
        bytes_.push_back(bytes_[static_cast<std::size_t>(a)] + bytes_[static_cast<std::size_t>(b)]);
        rank_.emplace(merges_[k], k);
    }
}

std::ptrdiff_t BpeVocab::rank(TokenId a, TokenId b) const {
    const auto it = rank_.find({a, b});
    return it == rank_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& ch : out)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    return out;
}

std::vector<std::string> pre_tokenize(std::string_view lowered) {
    std::vector<std::string> chunks;
    std::size_t i = 0;
    while (i < lowered.size()) {
        std::size_t j = i;
        while (j < lowered.size() && lowered[j] == ' ') ++j;
        while (j < lowered.size() && lowered[j] != ' ') ++j;
        chunks.emplace_back(lowered.substr(i, j - i));
        i = j;
    }
    return chunks;
}

namespace {

std::vector<TokenId> byte_ids(const std::string& chunk) {
    std::vector<TokenId> ids(chunk.size());
    for (std::size_t k = 0; k < chunk.size(); ++k) ids[k] = static_cast<unsigned char>(chunk[k]);
    return ids;
}

void apply_merge(std::vector<TokenId>& ids, TokenId a, TokenId b, TokenId merged) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (r + 1 < ids.size() && ids[r] == a && ids[r + 1] == b) {
            ids[w++] = merged;
            ++r;
        } else {
            ids[w++] = ids[r];
        }
    }
    ids.resize(w);
}

}  // namespace

BpeVocab train_bpe(const std::vector<std::string>& corpus, long merge_count) {
    if (merge_count < 0) throw std::invalid_argument("merge_count must be >= 0");
    if (corpus.empty()) throw std::invalid_argument("BPE corpus is empty");

    std::map<std::string, std::size_t> word_freq;
    for (const auto& text : corpus)
        for (auto& chunk : pre_tokenize(to_lower_ascii(text))) ++word_freq[chunk];

    std::vector<std::vector<TokenId>> words;
    std::vector<std::size_t> freq;
    for (const auto& [w, f] : word_freq) {
        words.push_back(byte_ids(w));
        freq.push_back(f);
    }

    std::vector<std::string> bytes;
    for (int b = 0; b < 256; ++b) bytes.emplace_back(1, static_cast<char>(b));
    std::vector<std::pair<TokenId, TokenId>> merges;

    for (long m = 0; m < merge_count; ++m) {
        std::map<std::pair<TokenId, TokenId>, std::size_t> counts;
        for (std::size_t k = 0; k < words.size(); ++k)
            for (std::size_t i = 0; i + 1 < words[k].size(); ++i) counts[{words[k][i], words[k][i + 1]}] += freq[k];
        if (counts.empty()) break;

        const auto better = [&](const auto& x, const auto& y) {
            if (x.second != y.second) return x.second > y.second;
            const auto& xa = bytes[static_cast<std::size_t>(x.first.first)];
            const auto& ya = bytes[static_cast<std::size_t>(y.first.first)];
            if (xa != ya) return xa < ya;
            return bytes[static_cast<std::size_t>(x.first.second)] < bytes[static_cast<std::size_t>(y.first.second)];
        };
        auto best = counts.begin();
        for (auto it = std::next(counts.begin()); it != counts.end(); ++it)
            if (better(*it, *best)) best = it;

        const auto [a, b] = best->first;
        const auto merged = static_cast<TokenId>(bytes.size());
        bytes.push_back(bytes[static_cast<std::size_t>(a)] + bytes[static_cast<std::size_t>(b)]);
        merges.emplace_back(a, b);
        for (auto& w : words) apply_merge(w, a, b, merged);
    }
    return BpeVocab(std::move(merges));
}

TokenSeq encode(const BpeVocab& vocab, std::string_view text) {
    TokenSeq seq{vocab.start_id()};
    for (const auto& chunk : pre_tokenize(to_lower_ascii(text))) {
        auto ids = byte_ids(chunk);
        while (ids.size() > 1) {
            std::ptrdiff_t best = -1;
            for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                const auto r = vocab.rank(ids[i], ids[i + 1]);
                if (r >= 0 && (best < 0 || r < best)) best = r;
            }
            if (best < 0) break;
            const auto [a, b] = vocab.merges()[static_cast<std::size_t>(best)];
            apply_merge(ids, a, b, static_cast<TokenId>(256 + best));
        }
        seq.insert(seq.end(), ids.begin(), ids.end());
    }
    if (seq.size() > kMaxSequence - 1) seq.resize(kMaxSequence - 1);
    seq.push_back(vocab.end_id());
    return seq;
}

std::string decode(const BpeVocab& vocab, const TokenSeq& seq) {
    std::string out;
    for (const TokenId id : seq) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
            throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
        }
        if (id >= vocab.start_id()) continue;
        out += vocab.bytes(id);
    }
    return out;
}

std::string vocab_to_json(const BpeVocab& vocab) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [a, b] : vocab.merges()) j.push_back({a, b});
    return j.dump();
}

BpeVocab vocab_from_json(const std::string& json) {
    const auto j = nlohmann::json::parse(json);
    std::vector<std::pair<TokenId, TokenId>> merges;
    for (const auto& m : j) merges.emplace_back(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
    return BpeVocab(std::move(merges));
}

}  // namespace ldg::text
