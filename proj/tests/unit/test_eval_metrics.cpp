#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "pforge/eval_metrics.hpp"

using namespace pforge;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& content) {
        static int n = 0;
        path = fs::temp_directory_path() /
               ("pforge-scores-" + std::to_string(::getpid()) + "-" + std::to_string(n++) + ".csv");
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempFile() { fs::remove(path); }
};

ScoreVector vec(std::vector<double> scores) {
    ScoreVector v;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        v.items.emplace_back("item" + std::to_string(i), scores[i]);
    }
    return v;
}

const fs::path kDc1Scores = fs::path(PFORGE_TEST_DATA_DIR) / "mmlu_dc1.csv";

} // namespace

TEST_CASE("rrgs at the baseline everywhere is exactly 1") {
    const auto v = vec({0.25, 0.25, 0.25, 0.25});
    CHECK(rrgs(v, RrgsVariant::all) == 1.0);
}

TEST_CASE("rrgs single perfect item") {
    const auto v = vec({1.0});
    CHECK(rrgs(v, RrgsVariant::all) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("rrgs analytic two-item cases are exact") {
    const auto v = vec({0.35, 0.15});
    // Deviations are 0.10 each: every variant gives 0.9.
    CHECK(std::abs(rrgs(v, RrgsVariant::all) - 0.9) <= 1e-12);
    CHECK(std::abs(rrgs(v, RrgsVariant::pos) - 0.9) <= 1e-12);
    CHECK(std::abs(rrgs(v, RrgsVariant::neg) - 0.9) <= 1e-12);

    const auto w = vec({0.45, 0.20});
    CHECK(std::abs(rrgs(w, RrgsVariant::all) - (1.0 - 0.125)) <= 1e-12);
    CHECK(std::abs(rrgs(w, RrgsVariant::pos) - 0.8) <= 1e-12);
    CHECK(std::abs(rrgs(w, RrgsVariant::neg) - 0.95) <= 1e-12);
}

TEST_CASE("items exactly at the baseline appear only in `all`") {
    const auto v = vec({0.25, 0.30});
    CHECK(rrgs(v, RrgsVariant::pos) == doctest::Approx(0.95));
    CHECK(rrgs(v, RrgsVariant::all) == doctest::Approx(1.0 - 0.025));
    CHECK_THROWS_AS(rrgs(v, RrgsVariant::neg), ScoreError);

    const auto only_baseline = vec({0.25});
    CHECK_THROWS_AS(rrgs(only_baseline, RrgsVariant::pos), ScoreError);
    CHECK_THROWS_AS(rrgs(only_baseline, RrgsVariant::neg), ScoreError);
    CHECK(rrgs(only_baseline, RrgsVariant::all) == 1.0);
}

TEST_CASE("rrgs is permutation invariant and monotone in deviations") {
    std::mt19937_64 rng(5);
    auto v = vec({0.1, 0.3, 0.6, 0.25, 0.2, 0.33});
    const double before = rrgs(v, RrgsVariant::all);
    std::shuffle(v.items.begin(), v.items.end(), rng);
    CHECK(rrgs(v, RrgsVariant::all) == doctest::Approx(before).epsilon(1e-15));

    // Increasing one deviation strictly decreases the score.
    auto worse = v;
    for (auto& [name, s] : worse.items) {
        if (s > 0.25) {
            s += 0.05;
            break;
        }
    }
    CHECK(rrgs(worse, RrgsVariant::all) < before);
}

TEST_CASE("configurable baseline") {
    auto v = vec({0.5, 0.5});
    v.baseline = 0.5;
    CHECK(rrgs(v, RrgsVariant::all) == 1.0);
}

TEST_CASE("load_scores: percent auto-detection") {
    TempFile f("item,score\nabstract_algebra,27.0\nanatomy,23.0\n");
    const auto v = load_scores(f.path);
    REQUIRE(v.items.size() == 2);
    CHECK(v.items[0].first == "abstract_algebra");
    CHECK(v.items[0].second == doctest::Approx(0.27));
    CHECK(v.items[1].second == doctest::Approx(0.23));
}

TEST_CASE("load_scores: fraction scale preserved when max <= 1") {
    TempFile f("a,0.24\nb,0.31\n");
    const auto v = load_scores(f.path);
    CHECK(v.items[0].second == 0.24);
    CHECK(v.items[1].second == 0.31);
}

TEST_CASE("load_scores: mixed scales treated as percentages") {
    TempFile f("a,0.9\nb,31\n");
    const auto v = load_scores(f.path);
    CHECK(v.items[0].second == doctest::Approx(0.009));
    CHECK(v.items[1].second == doctest::Approx(0.31));
}

TEST_CASE("load_scores error paths") {
    SUBCASE("empty file") {
        TempFile f("");
        CHECK_THROWS_AS(load_scores(f.path), ScoreError);
    }
    SUBCASE("header only") {
        TempFile f("item,score\n");
        CHECK_THROWS_AS(load_scores(f.path), ScoreError);
    }
    SUBCASE("duplicate items") {
        TempFile f("a,1\na,2\n");
        CHECK_THROWS_AS(load_scores(f.path), ScoreError);
    }
    SUBCASE("score out of range") {
        TempFile f("a,101\n");
        CHECK_THROWS_AS(load_scores(f.path), ScoreError);
    }
    SUBCASE("negative score") {
        TempFile f("a,-3\n");
        CHECK_THROWS_AS(load_scores(f.path), ScoreError);
    }
    SUBCASE("non-numeric score past the header") {
        TempFile f("a,1\nb,oops\n");
        CHECK_THROWS_AS(load_scores(f.path), ScoreError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_scores("/nonexistent/scores.csv"), ScoreError);
    }
}

TEST_CASE("DC-1 benchmark vector recomputes to the frozen values") {
    const auto v = load_scores(kDc1Scores);
    REQUIRE(v.items.size() == 57);

    // Values recomputed independently from the per-item table; the published
    // three-decimal aggregates round from unrounded inputs and sit ~0.005
    // away (see the acceptance suite, which pins the published bound).
    CHECK(rrgs(v, RrgsVariant::all) == doctest::Approx(0.9624385965).epsilon(1e-9));
    CHECK(rrgs(v, RrgsVariant::pos) == doctest::Approx(0.9578717949).epsilon(1e-9));
    CHECK(rrgs(v, RrgsVariant::neg) == doctest::Approx(0.9707058824).epsilon(1e-9));
}
