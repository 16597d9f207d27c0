#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "pforge/hash.hpp"
#include "pforge/normalize.hpp"

// Word-shingle MinHash signatures. A document's dedup-normalized text is cut
// into windows of n consecutive space-delimited words; each window hashes to
// a 64-bit shingle. The signature keeps, per derived hash function, the
// minimum over all shingles, so two signatures agree at a position with
// probability equal to the Jaccard similarity of the shingle sets.

namespace pforge {

struct ShingleParams {
    std::uint32_t n = 13;
    std::uint64_t seed = 0;

    friend bool operator==(const ShingleParams&, const ShingleParams&) = default;
};

// Documents shorter than n words hash as one whole-text shingle so exact
// duplicates of short documents are still caught.
inline std::vector<std::uint64_t> shingles(const NormalizedText& norm, const ShingleParams& params) {
    std::vector<std::uint64_t> out;
    const std::string_view text = norm.text;

    std::vector<std::size_t> word_starts;
    word_starts.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == ' ') word_starts.push_back(i + 1);
    }

    const std::size_t words = text.empty() ? 0 : word_starts.size();
    if (words < params.n) {
        out.push_back(hash64(text, params.seed));
        return out;
    }

    // Normalized text separates words by single spaces, so every n-word
    // window is one contiguous slice.
    out.reserve(words - params.n + 1);
    for (std::size_t w = 0; w + params.n <= words; ++w) {
        const std::size_t begin = word_starts[w];
        const std::size_t end = (w + params.n < words) ? word_starts[w + params.n] - 1 : text.size();
        out.push_back(hash64(text.substr(begin, end - begin), params.seed));
    }

    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct MinHashParams {
    std::uint32_t k = 128;
    ShingleParams shingle = {};

    std::uint64_t fingerprint() const {
        std::array<std::uint64_t, 3> raw = {k, shingle.n, shingle.seed};
        return hash64(raw.data(), sizeof(raw), 0x70666f726765ULL);
    }

    friend bool operator==(const MinHashParams&, const MinHashParams&) = default;
};

struct MinHashSignature {
    std::vector<std::uint64_t> values;
    std::uint64_t fingerprint = 0;
};

// Precomputes the per-position salts for one (k, seed) choice; reuse across
// documents when signing a corpus.
class SignatureBuilder {
public:
    explicit SignatureBuilder(MinHashParams params) : params_(params) {
        Splitmix64 stream(params.shingle.seed);
        salts_.resize(params.k);
        for (auto& s : salts_) s = stream.next();
        fingerprint_ = params.fingerprint();
    }

    const MinHashParams& params() const noexcept { return params_; }

    MinHashSignature sign(std::span<const std::uint64_t> shingle_hashes) const {
        if (shingle_hashes.empty()) {
            throw std::invalid_argument("minhash: empty shingle set");
        }
        MinHashSignature sig;
        sig.fingerprint = fingerprint_;
        sig.values.assign(params_.k, ~std::uint64_t{0});
        for (const std::uint64_t sh : shingle_hashes) {
            for (std::uint32_t i = 0; i < params_.k; ++i) {
                const std::uint64_t v = mix64(sh ^ salts_[i]);
                if (v < sig.values[i]) sig.values[i] = v;
            }
        }
        return sig;
    }

private:
    MinHashParams params_;
    std::vector<std::uint64_t> salts_;
    std::uint64_t fingerprint_ = 0;
};

inline MinHashSignature signature(std::span<const std::uint64_t> shingle_hashes,
                                  std::uint32_t k, std::uint64_t seed) {
    ShingleParams sp;
    sp.seed = seed;
    return SignatureBuilder(MinHashParams{k, sp}).sign(shingle_hashes);
}

// Fraction of positions where the two signatures agree. Unbiased estimator
// of the Jaccard similarity of the underlying shingle sets.
inline double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.fingerprint != b.fingerprint || a.values.size() != b.values.size()) {
        throw std::invalid_argument("minhash: signature parameter mismatch");
    }
    if (a.values.empty()) {
        throw std::invalid_argument("minhash: empty signature");
    }
    std::size_t matches = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        matches += (a.values[i] == b.values[i]) ? 1 : 0;
    }
    return static_cast<double>(matches) / static_cast<double>(a.values.size());
}

// Flat corpus-wide signature store; doc i owns values [i*k, (i+1)*k).
// On-disk layout (little-endian): magic "PJFSIG1\0", u32 k, u32 n, u64 seed,
// u64 count, then count records of (u64 doc_id, k x u64 values).
struct SignatureSet {
    MinHashParams params;
    std::vector<std::uint64_t> doc_ids;
    std::vector<std::uint64_t> values;

    std::size_t size() const noexcept { return doc_ids.size(); }

    std::span<const std::uint64_t> row(std::size_t i) const {
        return {values.data() + i * params.k, params.k};
    }

    double estimate(std::size_t i, std::size_t j) const {
        const auto a = row(i);
        const auto b = row(j);
        std::size_t matches = 0;
        for (std::uint32_t p = 0; p < params.k; ++p) {
            matches += (a[p] == b[p]) ? 1 : 0;
        }
        return static_cast<double>(matches) / static_cast<double>(params.k);
    }

    void save(const std::filesystem::path& path) const;
    static SignatureSet load(const std::filesystem::path& path);
};

namespace detail {

inline constexpr char kSigMagic[8] = {'P', 'J', 'F', 'S', 'I', 'G', '1', '\0'};

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

inline std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
}

} // namespace detail

inline void SignatureSet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write signature cache: " + path.string());

    std::string header;
    header.append(detail::kSigMagic, sizeof(detail::kSigMagic));
    detail::put_u32(header, params.k);
    detail::put_u32(header, params.shingle.n);
    detail::put_u64(header, params.shingle.seed);
    detail::put_u64(header, doc_ids.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    std::string record;
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        record.clear();
        detail::put_u64(record, doc_ids[i]);
        for (const std::uint64_t v : row(i)) detail::put_u64(record, v);
        out.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline SignatureSet SignatureSet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open signature cache: " + path.string());

    char header[32];
    if (!in.read(header, sizeof(header)) ||
        std::memcmp(header, detail::kSigMagic, sizeof(detail::kSigMagic)) != 0) {
        throw std::runtime_error("not a signature cache: " + path.string());
    }

    SignatureSet set;
    set.params.k = detail::get_u32(header + 8);
    set.params.shingle.n = detail::get_u32(header + 12);
    set.params.shingle.seed = detail::get_u64(header + 16);
    const std::uint64_t count = detail::get_u64(header + 24);
    if (set.params.k == 0) throw std::runtime_error("corrupt signature cache: k = 0");

    set.doc_ids.resize(count);
    set.values.resize(count * set.params.k);
    std::vector<char> record(8 + 8 * static_cast<std::size_t>(set.params.k));
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!in.read(record.data(), static_cast<std::streamsize>(record.size()))) {
            throw std::runtime_error("truncated signature cache: " + path.string());
        }
        set.doc_ids[i] = detail::get_u64(record.data());
        for (std::uint32_t p = 0; p < set.params.k; ++p) {
            set.values[i * set.params.k + p] = detail::get_u64(record.data() + 8 + 8 * p);
        }
    }
    return set;
}

} // namespace pforge
