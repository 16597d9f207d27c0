#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>

// Minimal Unicode support: UTF-8 decoding/encoding, character classification
// over code-point range tables, and simple lowercasing. The tables cover the
// principal blocks of each category rather than the full Unicode database;
// classification of rare scripts falls back to "unclassified", which every
// caller treats as ordinary text.

namespace pforge::uni {

inline constexpr char32_t kReplacement = 0xFFFD;

struct Range {
    char32_t lo;
    char32_t hi;
};

namespace detail {

template <std::size_t N>
constexpr bool in_ranges(const std::array<Range, N>& table, char32_t cp) noexcept {
    auto it = std::upper_bound(table.begin(), table.end(), cp,
                               [](char32_t v, const Range& r) { return v < r.lo; });
    return it != table.begin() && cp <= (it - 1)->hi;
}

// Unicode general categories P* (principal blocks). Note that $ + < = > ^ ` | ~
// are symbols in Unicode, not punctuation, and are deliberately absent.
inline constexpr std::array<Range, 80> kPunct = {{
    {0x0021, 0x0023}, {0x0025, 0x002A}, {0x002C, 0x002F}, {0x003A, 0x003B},
    {0x003F, 0x0040}, {0x005B, 0x005D}, {0x005F, 0x005F}, {0x007B, 0x007B},
    {0x007D, 0x007D}, {0x00A1, 0x00A1}, {0x00A7, 0x00A7}, {0x00AB, 0x00AB},
    {0x00B6, 0x00B7}, {0x00BB, 0x00BB}, {0x00BF, 0x00BF}, {0x037E, 0x037E},
    {0x0387, 0x0387}, {0x055A, 0x055F}, {0x0589, 0x058A}, {0x05BE, 0x05BE},
    {0x05C0, 0x05C0}, {0x05C3, 0x05C3}, {0x05C6, 0x05C6}, {0x05F3, 0x05F4},
    {0x0609, 0x060A}, {0x060C, 0x060D}, {0x061B, 0x061B}, {0x061E, 0x061F},
    {0x066A, 0x066D}, {0x06D4, 0x06D4}, {0x0700, 0x070D}, {0x07F7, 0x07F9},
    {0x0830, 0x083E}, {0x085E, 0x085E}, {0x0964, 0x0965}, {0x0970, 0x0970},
    {0x09FD, 0x09FD}, {0x0A76, 0x0A76}, {0x0AF0, 0x0AF0}, {0x0C77, 0x0C77},
    {0x0C84, 0x0C84}, {0x0DF4, 0x0DF4}, {0x0E4F, 0x0E4F}, {0x0E5A, 0x0E5B},
    {0x0F04, 0x0F12}, {0x0F14, 0x0F14}, {0x0F3A, 0x0F3D}, {0x0F85, 0x0F85},
    {0x0FD0, 0x0FD4}, {0x104A, 0x104F}, {0x10FB, 0x10FB}, {0x1360, 0x1368},
    {0x1400, 0x1400}, {0x166E, 0x166E}, {0x169B, 0x169C}, {0x16EB, 0x16ED},
    {0x1735, 0x1736}, {0x17D4, 0x17D6}, {0x17D8, 0x17DA}, {0x1800, 0x180A},
    {0x1944, 0x1945}, {0x1A1E, 0x1A1F}, {0x1AA0, 0x1AA6}, {0x1AA8, 0x1AAD},
    {0x1B5A, 0x1B60}, {0x1C3B, 0x1C3F}, {0x1C7E, 0x1C7F}, {0x2010, 0x2027},
    {0x2030, 0x2043}, {0x2045, 0x2051}, {0x2053, 0x205E}, {0x207D, 0x207E},
    {0x208D, 0x208E}, {0x2329, 0x232A}, {0x2768, 0x2775}, {0x27E6, 0x27EF},
    {0x2983, 0x2998}, {0x2E00, 0x2E5D}, {0x3001, 0x3003}, {0x3008, 0x3011},
}};

inline constexpr std::array<Range, 8> kPunctHigh = {{
    {0x3014, 0x301F}, {0x3030, 0x3030}, {0x303D, 0x303D}, {0x30A0, 0x30A0},
    {0x30FB, 0x30FB}, {0xFE10, 0xFE19}, {0xFE30, 0xFE52}, {0xFF01, 0xFF65},
}};

// L* principal blocks.
inline constexpr std::array<Range, 46> kLetter = {{
    {0x0041, 0x005A}, {0x0061, 0x007A}, {0x00AA, 0x00AA}, {0x00B5, 0x00B5},
    {0x00BA, 0x00BA}, {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x02C1},
    {0x0370, 0x0374}, {0x0376, 0x0377}, {0x037A, 0x037D}, {0x037F, 0x037F},
    {0x0386, 0x0386}, {0x0388, 0x038A}, {0x038C, 0x038C}, {0x038E, 0x03A1},
    {0x03A3, 0x03F5}, {0x03F7, 0x0481}, {0x048A, 0x052F}, {0x0531, 0x0556},
    {0x0561, 0x0587}, {0x05D0, 0x05EA}, {0x0620, 0x064A}, {0x0671, 0x06D3},
    {0x06FA, 0x06FC}, {0x0710, 0x072F}, {0x0904, 0x0939}, {0x0958, 0x0961},
    {0x0E01, 0x0E30}, {0x10A0, 0x10C5}, {0x10D0, 0x10FA}, {0x1100, 0x1159},
    {0x1E00, 0x1FBC}, {0x1FC2, 0x1FCC}, {0x1FD0, 0x1FDB}, {0x1FE0, 0x1FEC},
    {0x1FF2, 0x1FFC}, {0x3041, 0x3096}, {0x30A1, 0x30FA}, {0x30FC, 0x30FF},
    {0x3400, 0x4DBF}, {0x4E00, 0x9FFF}, {0xA000, 0xA48C}, {0xAC00, 0xD7A3},
    {0xF900, 0xFA6D}, {0xFB00, 0xFB06},
}};

// N* principal blocks.
inline constexpr std::array<Range, 14> kNumber = {{
    {0x0030, 0x0039}, {0x00B2, 0x00B3}, {0x00B9, 0x00B9}, {0x00BC, 0x00BE},
    {0x0660, 0x0669}, {0x06F0, 0x06F9}, {0x0966, 0x096F}, {0x0E50, 0x0E59},
    {0x2070, 0x2070}, {0x2074, 0x2079}, {0x2080, 0x2089}, {0x2150, 0x2189},
    {0x3007, 0x3007}, {0xFF10, 0xFF19},
}};

} // namespace detail

// Unicode White_Space property.
constexpr bool is_space(char32_t cp) noexcept {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
           cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 ||
           cp == 0x2029 || cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// \s semantics of common regex engines: White_Space plus the C0 separators.
constexpr bool is_pattern_space(char32_t cp) noexcept {
    return is_space(cp) || (cp >= 0x1C && cp <= 0x1F);
}

// C0 and C1 control characters.
constexpr bool is_control(char32_t cp) noexcept {
    return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F);
}

constexpr bool is_punct(char32_t cp) noexcept {
    if (cp < 0x80) {
        return detail::in_ranges(detail::kPunct, cp);
    }
    return detail::in_ranges(detail::kPunct, cp) || detail::in_ranges(detail::kPunctHigh, cp);
}

constexpr bool is_letter(char32_t cp) noexcept {
    return detail::in_ranges(detail::kLetter, cp);
}

constexpr bool is_number(char32_t cp) noexcept {
    return detail::in_ranges(detail::kNumber, cp);
}

constexpr bool is_alnum(char32_t cp) noexcept {
    return is_letter(cp) || is_number(cp);
}

// Simple lowercase mapping for ASCII, Latin-1, Latin Extended-A, Greek and
// Cyrillic. Other scripts pass through unchanged. Outputs are never
// uppercase inputs, so the mapping is idempotent.
constexpr char32_t to_lower(char32_t cp) noexcept {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
    if (cp >= 0x0100 && cp <= 0x0137) return cp | 1;
    if (cp >= 0x0139 && cp <= 0x0148) return ((cp + 1) | 1) - 1;
    if (cp >= 0x014A && cp <= 0x0177) return cp | 1;
    if (cp >= 0x0179 && cp <= 0x017E) return ((cp + 1) | 1) - 1;
    if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) return cp + 0x20;
    if (cp >= 0x0410 && cp <= 0x042F) return cp + 0x20;
    if (cp >= 0x0400 && cp <= 0x040F) return cp + 0x50;
    return cp;
}

// Decodes one UTF-8 sequence at s[i]. Advances i past the sequence and
// returns the code point, or kReplacement for an invalid byte (advancing by
// one so decoding always terminates).
inline char32_t decode_next(std::string_view s, std::size_t& i) noexcept {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }

    auto cont = [&](std::size_t off) {
        return i + off < s.size() &&
               (static_cast<unsigned char>(s[i + off]) & 0xC0) == 0x80;
    };

    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        char32_t cp = (char32_t(b0 & 0x1F) << 6) |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3F);
        if (cp >= 0x80) {
            i += 2;
            return cp;
        }
    } else if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        char32_t cp = (char32_t(b0 & 0x0F) << 12) |
                      (char32_t(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3F);
        if (cp >= 0x800 && !(cp >= 0xD800 && cp <= 0xDFFF)) {
            i += 3;
            return cp;
        }
    } else if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        char32_t cp = (char32_t(b0 & 0x07) << 18) |
                      (char32_t(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
                      (char32_t(static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) |
                      (static_cast<unsigned char>(s[i + 3]) & 0x3F);
        if (cp >= 0x10000 && cp <= 0x10FFFF) {
            i += 4;
            return cp;
        }
    }

    ++i;
    return kReplacement;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Returns the byte offset of the first invalid UTF-8 byte, or npos if valid.
inline std::size_t find_invalid_utf8(std::string_view s) noexcept {
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t at = i;
        if (decode_next(s, i) == kReplacement &&
            static_cast<unsigned char>(s[at]) >= 0x80) {
            // kReplacement itself is a valid three-byte sequence; only flag
            // positions where the input was actually malformed.
            if (!(i - at == 3 && s.substr(at, 3) == "\xEF\xBF\xBD")) {
                return at;
            }
        }
    }
    return std::string_view::npos;
}

inline std::size_t count_codepoints(std::string_view s) noexcept {
    std::size_t i = 0, n = 0;
    while (i < s.size()) {
        decode_next(s, i);
        ++n;
    }
    return n;
}

} // namespace pforge::uni
