#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "pforge/unicode.hpp"

// Byte-level BPE encoder over the standard vocab.json / merges.txt file
// pair. Bytes are first remapped to printable code points, pre-tokenization
// follows the usual contraction / letter-run / digit-run / other-run /
// whitespace split with leading-space attachment, and merges apply lowest
// rank first. Decoding is out of scope; only encoding feeds the statistics.

namespace pforge {

class TokenizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Byte values that survive as themselves: '!'..'~', 0xA1..0xAC, 0xAE..0xFF.
// Everything else is displaced past 0xFF, in ascending order.
inline const std::array<char32_t, 256>& byte_to_unicode() {
    static const std::array<char32_t, 256> table = [] {
        std::array<char32_t, 256> t{};
        std::array<bool, 256> direct{};
        for (int b = '!'; b <= '~'; ++b) direct[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
        char32_t fill = 256;
        for (int b = 0; b < 256; ++b) {
            t[b] = direct[b] ? static_cast<char32_t>(b) : fill++;
        }
        return t;
    }();
    return table;
}

inline const std::unordered_map<char32_t, unsigned char>& unicode_to_byte() {
    static const std::unordered_map<char32_t, unsigned char> table = [] {
        std::unordered_map<char32_t, unsigned char> t;
        const auto& fwd = byte_to_unicode();
        for (int b = 0; b < 256; ++b) t.emplace(fwd[b], static_cast<unsigned char>(b));
        return t;
    }();
    return table;
}

// Key for merge-rank lookups; token strings never contain a NUL byte.
inline std::string pair_key(std::string_view left, std::string_view right) {
    std::string key;
    key.reserve(left.size() + right.size() + 1);
    key.append(left);
    key.push_back('\0');
    key.append(right);
    return key;
}

} // namespace detail

struct BpeModel {
    std::unordered_map<std::string, std::uint32_t> vocab;
    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, std::uint32_t> merge_ranks;
    std::size_t merge_count = 0;

    std::size_t vocab_size() const noexcept { return vocab.size(); }

    // Raw bytes of a token's surface form (reverses the byte remapping).
    std::string decode_token(std::uint32_t id) const {
        if (id >= id_to_token.size()) {
            throw TokenizerError("unknown token id " + std::to_string(id));
        }
        const std::string& token = id_to_token[id];
        const auto& reverse = detail::unicode_to_byte();
        std::string out;
        out.reserve(token.size());
        std::size_t i = 0;
        while (i < token.size()) {
            const char32_t cp = uni::decode_next(token, i);
            auto it = reverse.find(cp);
            if (it != reverse.end()) {
                out.push_back(static_cast<char>(it->second));
            } else {
                uni::append_utf8(out, cp);
            }
        }
        return out;
    }
};

// Loads and validates a vocab.json / merges.txt pair. The vocab maps token
// strings to ids; merges lists one space-separated symbol pair per line in
// rank order, with an optional `#version` header.
inline BpeModel load_bpe(const std::filesystem::path& vocab_path,
                         const std::filesystem::path& merges_path) {
    BpeModel model;

    std::ifstream vin(vocab_path, std::ios::binary);
    if (!vin) throw TokenizerError("cannot open vocab: " + vocab_path.string());
    nlohmann::json j;
    try {
        vin >> j;
    } catch (const nlohmann::json::exception& e) {
        throw TokenizerError("invalid vocab json: " + std::string(e.what()));
    }
    if (!j.is_object()) throw TokenizerError("vocab must be a JSON object");

    std::uint32_t max_id = 0;
    for (const auto& [token, value] : j.items()) {
        if (!value.is_number_unsigned()) {
            throw TokenizerError("vocab id for \"" + token + "\" is not an unsigned integer");
        }
        const auto id = value.get<std::uint64_t>();
        if (id > std::numeric_limits<std::uint32_t>::max()) {
            throw TokenizerError("vocab id out of range for \"" + token + "\"");
        }
        if (!model.vocab.emplace(token, static_cast<std::uint32_t>(id)).second) {
            throw TokenizerError("duplicate vocab token \"" + token + "\"");
        }
        max_id = std::max(max_id, static_cast<std::uint32_t>(id));
    }
    if (model.vocab.empty()) throw TokenizerError("empty vocab");

    model.id_to_token.resize(static_cast<std::size_t>(max_id) + 1);
    std::vector<bool> seen(model.id_to_token.size(), false);
    for (const auto& [token, id] : model.vocab) {
        if (seen[id]) throw TokenizerError("duplicate vocab id " + std::to_string(id));
        seen[id] = true;
        model.id_to_token[id] = token;
    }

    std::ifstream min(merges_path, std::ios::binary);
    if (!min) throw TokenizerError("cannot open merges: " + merges_path.string());
    std::string line;
    std::uint32_t rank = 0;
    std::uint64_t line_no = 0;
    while (std::getline(min, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line.front() == '#') continue;

        const auto space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 >= line.size() ||
            line.find(' ', space + 1) != std::string::npos) {
            throw TokenizerError(merges_path.string() + ":" + std::to_string(line_no) +
                                 ": malformed merge line");
        }
        const std::string left = line.substr(0, space);
        const std::string right = line.substr(space + 1);
        if (!model.vocab.count(left + right)) {
            throw TokenizerError(merges_path.string() + ":" + std::to_string(line_no) +
                                 ": merge output \"" + left + right + "\" missing from vocab");
        }
        model.merge_ranks.emplace(detail::pair_key(left, right), rank++);
    }
    model.merge_count = rank;
    return model;
}

// Splits text into pre-tokens: contractions ('s 't 're 've 'm 'll 'd),
// letter runs, digit runs and other-symbol runs (each optionally absorbing
// one leading space), and whitespace runs that yield their final character
// to a following non-space token.
inline std::vector<std::string_view> gpt2_pretokenize(std::string_view text) {
    std::vector<std::string_view> out;

    enum class Class { space, letter, number, other };
    auto classify = [](char32_t cp) {
        if (uni::is_pattern_space(cp)) return Class::space;
        if (uni::is_letter(cp)) return Class::letter;
        if (uni::is_number(cp)) return Class::number;
        return Class::other;
    };

    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        std::size_t peek = i;
        char32_t cp = uni::decode_next(text, peek);

        if (cp == '\'') {
            static constexpr std::string_view suffixes[] = {"re", "ve", "ll", "s", "t", "m", "d"};
            const std::string_view rest = text.substr(peek);
            bool matched = false;
            for (const auto suffix : suffixes) {
                if (rest.substr(0, suffix.size()) == suffix) {
                    i = peek + suffix.size();
                    out.push_back(text.substr(start, i - start));
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }

        Class cls = classify(cp);
        std::size_t run_from = peek;
        if (cp == ' ' && peek < text.size()) {
            // A single space attaches to a following letter/number/other run.
            std::size_t after = peek;
            const char32_t next_cp = uni::decode_next(text, after);
            const Class next_cls = classify(next_cp);
            if (next_cls != Class::space) {
                cls = next_cls;
                run_from = after;
            }
        }

        if (cls != Class::space) {
            i = run_from;
            while (i < text.size()) {
                std::size_t ahead = i;
                if (classify(uni::decode_next(text, ahead)) != cls) break;
                i = ahead;
            }
            out.push_back(text.substr(start, i - start));
            continue;
        }

        // Whitespace run. If followed by a non-space, the last whitespace
        // character is left behind to attach to the next token.
        std::size_t end = peek;
        std::size_t last_begin = start;
        while (end < text.size()) {
            std::size_t ahead = end;
            if (classify(uni::decode_next(text, ahead)) != Class::space) break;
            last_begin = end;
            end = ahead;
        }
        if (end < text.size() && end > peek) {
            out.push_back(text.substr(start, last_begin - start));
            i = last_begin;
        } else if (end < text.size()) {
            out.push_back(text.substr(start, end - start));
            i = end;
        } else {
            out.push_back(text.substr(start, end - start));
            i = end;
        }
    }
    return out;
}

// Stateful encoder with a pre-token result cache. Construct one per worker;
// the model itself is immutable and shared.
class BpeEncoder {
public:
    explicit BpeEncoder(const BpeModel& model) : model_(&model) {}

    std::vector<std::uint32_t> encode(std::string_view text) {
        std::vector<std::uint32_t> ids;
        for (const std::string_view piece : gpt2_pretokenize(text)) {
            const auto [it, inserted] = cache_.try_emplace(std::string(piece));
            if (inserted) it->second = encode_piece(piece);
            ids.insert(ids.end(), it->second.begin(), it->second.end());
        }
        return ids;
    }

private:
    std::vector<std::uint32_t> encode_piece(std::string_view piece) const {
        // Remap each byte to its printable stand-in; symbols start as single
        // characters and grow by merging.
        std::vector<std::string> symbols;
        symbols.reserve(piece.size());
        const auto& fwd = detail::byte_to_unicode();
        for (const unsigned char byte : piece) {
            std::string s;
            uni::append_utf8(s, fwd[byte]);
            symbols.push_back(std::move(s));
        }

        while (symbols.size() > 1) {
            std::uint32_t best_rank = std::numeric_limits<std::uint32_t>::max();
            std::size_t best_at = 0;
            for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
                auto it = model_->merge_ranks.find(detail::pair_key(symbols[i], symbols[i + 1]));
                if (it != model_->merge_ranks.end() && it->second < best_rank) {
                    best_rank = it->second;
                    best_at = i;
                }
            }
            if (best_rank == std::numeric_limits<std::uint32_t>::max()) break;

            // Merge every occurrence of the winning pair, left to right.
            const std::string left = symbols[best_at];
            const std::string right = symbols[best_at + 1];
            std::vector<std::string> merged;
            merged.reserve(symbols.size());
            for (std::size_t i = 0; i < symbols.size();) {
                if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
                    merged.push_back(left + right);
                    i += 2;
                } else {
                    merged.push_back(std::move(symbols[i]));
                    i += 1;
                }
            }
            symbols.swap(merged);
        }

        std::vector<std::uint32_t> ids;
        ids.reserve(symbols.size());
        for (const std::string& sym : symbols) {
            auto it = model_->vocab.find(sym);
            if (it != model_->vocab.end()) {
                ids.push_back(it->second);
                continue;
            }
            // Byte fallback: emit the symbol one mapped byte at a time.
            // Characters without a vocab entry are dropped; a model with all
            // 256 byte tokens never reaches that case.
            std::size_t i = 0;
            while (i < sym.size()) {
                std::string one;
                const std::size_t at = i;
                uni::decode_next(sym, i);
                one.assign(sym, at, i - at);
                auto bit = model_->vocab.find(one);
                if (bit != model_->vocab.end()) ids.push_back(bit->second);
            }
        }
        return ids;
    }

    const BpeModel* model_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> cache_;
};

// One-off encode without a persistent cache.
inline std::vector<std::uint32_t> encode(const BpeModel& model, std::string_view text) {
    return BpeEncoder(model).encode(text);
}

} // namespace pforge
