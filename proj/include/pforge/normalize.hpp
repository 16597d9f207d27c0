#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "pforge/unicode.hpp"

// Canonical text forms shared by the length filter and the dedup signatures.
// Punctuation is removed outright (not replaced by a space), whitespace and
// control runs collapse to a single space, and the ends are trimmed. The
// dedup variant additionally lowercases, so texts differing only in case and
// punctuation map to one representation.

namespace pforge {

struct NormalizedText {
    std::string text;
    std::size_t char_len = 0; // Unicode scalar values, not bytes
};

namespace detail {

inline NormalizedText normalize(std::string_view input, bool lowercase) {
    NormalizedText out;
    out.text.reserve(input.size());

    bool pending_space = false;
    std::size_t i = 0;
    while (i < input.size()) {
        char32_t cp = uni::decode_next(input, i);
        if (uni::is_punct(cp)) continue;
        if (uni::is_space(cp) || uni::is_control(cp)) {
            pending_space = true;
            continue;
        }
        if (pending_space && out.char_len > 0) {
            out.text.push_back(' ');
            ++out.char_len;
        }
        pending_space = false;
        if (lowercase) cp = uni::to_lower(cp);
        uni::append_utf8(out.text, cp);
        ++out.char_len;
    }
    return out;
}

} // namespace detail

inline NormalizedText normalize_for_filter(std::string_view text) {
    return detail::normalize(text, /*lowercase=*/false);
}

inline NormalizedText normalize_for_dedup(std::string_view text) {
    return detail::normalize(text, /*lowercase=*/true);
}

} // namespace pforge
