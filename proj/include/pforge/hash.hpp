#pragma once

#include <cstdint>
#include <cstring>
#include <cstddef>
#include <string_view>

// Seeded 64-bit hashing used throughout the toolkit. Dedup results must be
// reproducible across runs and machines, so these functions are frozen: any
// change invalidates existing signature caches and cluster files.

namespace pforge {

// Finalizer of the splitmix64 generator. Bijective on uint64_t, so for a
// fixed salt the map x -> mix64(x ^ salt) is a permutation of the key space.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// splitmix64 stream; used to derive independent per-index salts from a seed.
struct Splitmix64 {
    std::uint64_t state = 0;

    explicit constexpr Splitmix64(std::uint64_t seed) noexcept : state(seed) {}

    constexpr std::uint64_t next() noexcept {
        state += 0x9e3779b97f4a7c15ULL;
        return mix64(state);
    }
};

// MurmurHash64A (Austin Appleby, public domain). Stable, seeded, and fast
// enough for shingle hashing at corpus scale.
inline std::uint64_t hash64(const void* data, std::size_t len, std::uint64_t seed = 0) noexcept {
    const std::uint64_t m = 0xc6a4a7935bd1e995ULL;
    const int r = 47;

    std::uint64_t h = seed ^ (static_cast<std::uint64_t>(len) * m);

    const unsigned char* p = static_cast<const unsigned char*>(data);
    const unsigned char* end = p + (len & ~std::size_t{7});

    while (p != end) {
        std::uint64_t k;
        std::memcpy(&k, p, 8);
        p += 8;

        k *= m;
        k ^= k >> r;
        k *= m;

        h ^= k;
        h *= m;
    }

    switch (len & 7) {
        case 7: h ^= std::uint64_t(p[6]) << 48; [[fallthrough]];
        case 6: h ^= std::uint64_t(p[5]) << 40; [[fallthrough]];
        case 5: h ^= std::uint64_t(p[4]) << 32; [[fallthrough]];
        case 4: h ^= std::uint64_t(p[3]) << 24; [[fallthrough]];
        case 3: h ^= std::uint64_t(p[2]) << 16; [[fallthrough]];
        case 2: h ^= std::uint64_t(p[1]) << 8;  [[fallthrough]];
        case 1: h ^= std::uint64_t(p[0]);
                h *= m;
    }

    h ^= h >> r;
    h *= m;
    h ^= h >> r;
    return h;
}

inline std::uint64_t hash64(std::string_view s, std::uint64_t seed = 0) noexcept {
    return hash64(s.data(), s.size(), seed);
}

// Keeps string literals from binding to the raw (data, len) overload.
inline std::uint64_t hash64(const char* s, std::uint64_t seed = 0) noexcept {
    return hash64(std::string_view(s), seed);
}

} // namespace pforge
