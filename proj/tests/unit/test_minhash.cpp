#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "pforge/minhash.hpp"
#include "pforge/normalize.hpp"

using namespace pforge;

namespace {

// Disjoint random shingle-hash sets with a prescribed overlap; exact Jaccard
// is shared / (shared + 2 * unique).
struct SetPair {
    std::vector<std::uint64_t> a;
    std::vector<std::uint64_t> b;
    double jaccard;
};

SetPair make_pair_with_jaccard(std::mt19937_64& rng, std::size_t shared, std::size_t unique) {
    std::set<std::uint64_t> used;
    auto fresh = [&] {
        for (;;) {
            const std::uint64_t v = rng();
            if (used.insert(v).second) return v;
        }
    };

    SetPair p;
    for (std::size_t i = 0; i < shared; ++i) {
        const std::uint64_t v = fresh();
        p.a.push_back(v);
        p.b.push_back(v);
    }
    for (std::size_t i = 0; i < unique; ++i) p.a.push_back(fresh());
    for (std::size_t i = 0; i < unique; ++i) p.b.push_back(fresh());
    p.jaccard = static_cast<double>(shared) / static_cast<double>(shared + 2 * unique);
    return p;
}

// Brute-force Jaccard over the raw sets, independent of the signatures.
double exact_jaccard(std::vector<std::uint64_t> a, std::vector<std::uint64_t> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::uint64_t> inter, uni;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

NormalizedText norm(std::string_view text) { return normalize_for_dedup(text); }

} // namespace

TEST_CASE("shingles: window count and short-document rule") {
    ShingleParams params;
    params.n = 2;
    const auto two = shingles(norm("a b c"), params);
    CHECK(two.size() == 2);

    params.n = 13;
    const auto whole = shingles(norm("a b"), params);
    CHECK(whole.size() == 1);
    CHECK(whole[0] == hash64("a b", params.seed));

    // Empty text still yields one whole-text shingle.
    CHECK(shingles(norm(""), params).size() == 1);
}

TEST_CASE("shingles: identical after normalization means identical sets") {
    ShingleParams params;
    params.n = 3;
    const auto s1 = shingles(norm("The CAT sat, on the Mat."), params);
    const auto s2 = shingles(norm("the cat sat on the mat"), params);
    CHECK(s1 == s2);
}

TEST_CASE("shingles: repeated windows collapse to a set") {
    ShingleParams params;
    params.n = 1;
    const auto s = shingles(norm("a a a b"), params);
    CHECK(s.size() == 2);
}

TEST_CASE("signature is deterministic and order-invariant") {
    std::mt19937_64 rng(1);
    auto pair = make_pair_with_jaccard(rng, 100, 0);

    const auto sig1 = signature(pair.a, 128, 7);
    std::shuffle(pair.a.begin(), pair.a.end(), rng);
    const auto sig2 = signature(pair.a, 128, 7);
    CHECK(sig1.values == sig2.values);
    CHECK(sig1.fingerprint == sig2.fingerprint);
    CHECK(sig1.values.size() == 128);
}

TEST_CASE("signature on empty shingle set throws") {
    std::vector<std::uint64_t> empty;
    CHECK_THROWS_AS(signature(empty, 128, 0), std::invalid_argument);
}

TEST_CASE("identical shingle sets give identical signatures") {
    std::mt19937_64 rng(2);
    const auto pair = make_pair_with_jaccard(rng, 500, 0);
    const auto sa = signature(pair.a, 128, 3);
    const auto sb = signature(pair.b, 128, 3);
    CHECK(sa.values == sb.values);
    CHECK(estimate_jaccard(sa, sb) == 1.0);
}

TEST_CASE("disjoint sets estimate near zero") {
    std::mt19937_64 rng(3);
    std::set<std::uint64_t> used;
    std::vector<std::uint64_t> a, b;
    for (int i = 0; i < 500; ++i) {
        a.push_back(rng());
        b.push_back(rng() | 1ULL << 63);
    }
    const auto sa = signature(a, 128, 5);
    const auto sb = signature(b, 128, 5);
    CHECK(estimate_jaccard(sa, sb) <= 0.05);
}

TEST_CASE("estimate tracks exact Jaccard at 0.5 within 3 sigma") {
    std::mt19937_64 rng(4);
    // shared=400, unique=200 per side: J = 400/800 = 0.5 exactly.
    const auto pair = make_pair_with_jaccard(rng, 400, 200);
    REQUIRE(exact_jaccard(pair.a, pair.b) == 0.5);

    const auto sa = signature(pair.a, 128, 9);
    const auto sb = signature(pair.b, 128, 9);
    const double bound = 3.0 * std::sqrt(0.25 / 128.0);
    CHECK(std::abs(estimate_jaccard(sa, sb) - 0.5) <= bound);
}

TEST_CASE("estimator is unbiased over seeds") {
    std::mt19937_64 rng(5);
    const auto pair = make_pair_with_jaccard(rng, 300, 100); // J = 0.6
    REQUIRE(exact_jaccard(pair.a, pair.b) == doctest::Approx(0.6));

    double sum = 0.0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        const auto sa = signature(pair.a, 64, 1000 + t);
        const auto sb = signature(pair.b, 64, 1000 + t);
        sum += estimate_jaccard(sa, sb);
    }
    const double mean = sum / trials;
    // Standard error of the mean is sqrt(J(1-J)/k)/sqrt(trials) ~ 0.003.
    CHECK(std::abs(mean - 0.6) < 0.012);
}

TEST_CASE("estimate_jaccard rejects parameter mismatches") {
    std::mt19937_64 rng(6);
    const auto pair = make_pair_with_jaccard(rng, 50, 0);
    const auto sa = signature(pair.a, 128, 1);
    const auto sb = signature(pair.b, 128, 2); // different seed
    CHECK_THROWS_AS(estimate_jaccard(sa, sb), std::invalid_argument);

    const auto sc = signature(pair.b, 64, 1); // different k
    CHECK_THROWS_AS(estimate_jaccard(sa, sc), std::invalid_argument);
}

TEST_CASE("signature cache round trip") {
    std::mt19937_64 rng(8);
    MinHashParams params;
    params.k = 16;
    params.shingle.n = 5;
    params.shingle.seed = 42;
    SignatureBuilder builder(params);

    SignatureSet set;
    set.params = params;
    for (std::uint64_t id = 1; id <= 10; ++id) {
        const auto pair = make_pair_with_jaccard(rng, 20, 5);
        const auto sig = builder.sign(pair.a);
        set.doc_ids.push_back(id * 11);
        set.values.insert(set.values.end(), sig.values.begin(), sig.values.end());
    }

    const auto path = std::filesystem::temp_directory_path() / "pforge-sigs.bin";
    set.save(path);
    const auto loaded = SignatureSet::load(path);
    std::filesystem::remove(path);

    CHECK(loaded.params == set.params);
    CHECK(loaded.doc_ids == set.doc_ids);
    CHECK(loaded.values == set.values);
}
