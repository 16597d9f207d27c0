#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unistd.h>

#include "pforge/lowlen_filter.hpp"

using namespace pforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int n = 0;
        path = fs::temp_directory_path() /
               ("pforge-filter-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Document doc(std::uint64_t id, std::string source, std::string text) {
    Document d;
    d.doc_id = id;
    d.source = std::move(source);
    d.text = std::move(text);
    d.byte_len = d.text.size();
    return d;
}

// A text whose normalized form has exactly n characters.
std::string text_of_norm_len(std::size_t n) {
    std::string s(n, 'x');
    for (std::size_t i = 9; i < n; i += 10) s[i] = ' ';
    if (!s.empty() && s.back() == ' ') s.back() = 'x';
    return s;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("should_keep boundary: 199 drops, 200 keeps") {
    FilterPolicy policy;
    REQUIRE(normalize_for_filter(text_of_norm_len(199)).char_len == 199);
    REQUIRE(normalize_for_filter(text_of_norm_len(200)).char_len == 200);

    CHECK_FALSE(should_keep(doc(1, "ArXiv", text_of_norm_len(199)), policy));
    CHECK(should_keep(doc(2, "ArXiv", text_of_norm_len(200)), policy));
}

TEST_CASE("exempt sources keep short documents") {
    FilterPolicy policy;
    CHECK(should_keep(doc(1, "Books", "ten chars."), policy));
    CHECK(should_keep(doc(2, "Github", "x = 1"), policy));
    // Label casing does not matter for exemptions.
    CHECK(should_keep(doc(3, "GitHub", "x = 1"), policy));
    CHECK(should_keep(doc(4, "books", ""), policy));
}

TEST_CASE("length is measured after normalization, in scalars") {
    FilterPolicy policy;
    policy.min_chars = 5;
    // 6 punctuation chars + 4 letters: normalized length 4.
    CHECK_FALSE(should_keep(doc(1, "C4", "a,b.c!d??!"), policy));
    // Multibyte letters count once each.
    policy.min_chars = 3;
    CHECK(should_keep(doc(2, "C4", "äöü"), policy));
}

TEST_CASE("filter_corpus reports per-source rates and preserves order") {
    TempDir dir;
    const auto shard = dir.path / "in.jsonl";
    {
        ShardWriter w(shard);
        // 1000 CommonCrawl docs, 50 of them short.
        for (int i = 0; i < 1000; ++i) {
            const bool shortdoc = i % 20 == 0;
            w.write(doc(100 + i, "CommonCrawl", text_of_norm_len(shortdoc ? 50 : 250)));
        }
        // Exempt source, all short.
        for (int i = 0; i < 10; ++i) w.write(doc(5000 + i, "Books", "tiny"));
        w.close();
    }

    CorpusManifest manifest = build_manifest({shard});
    auto [kept, report] = filter_corpus(manifest, FilterPolicy{}, dir.path / "out", 2);

    CHECK(report.per_source.at("CommonCrawl").dropped == 50);
    CHECK(report.per_source.at("CommonCrawl").kept == 950);
    CHECK(report.per_source.at("CommonCrawl").rate() == doctest::Approx(0.05));
    CHECK(report.per_source.at("Books").dropped == 0);
    CHECK(kept.sources.at("CommonCrawl").documents == 950);
    CHECK(kept.sources.at("Books").documents == 10);

    // Report CSV row formatting matches the two-decimal percent convention.
    const auto table = report.to_table();
    REQUIRE(table.header == std::vector<std::string>{"Data source", "Document filter rate"});
    bool found = false;
    for (const auto& row : table.rows) {
        if (row[0] == "CommonCrawl") {
            CHECK(row[1] == "5.00%");
            found = true;
        }
    }
    CHECK(found);

    // Output preserves input order among kept docs.
    ShardReader reader(kept.shards[0], 0);
    std::uint64_t prev = 0;
    while (auto d = reader.next()) {
        CHECK(d->doc_id > prev);
        prev = d->doc_id;
    }
}

TEST_CASE("all-exempt corpus has zero rate everywhere") {
    TempDir dir;
    const auto shard = dir.path / "in.jsonl";
    {
        ShardWriter w(shard);
        for (int i = 0; i < 5; ++i) w.write(doc(i + 1, i % 2 ? "Books" : "Github", "x"));
        w.close();
    }
    auto [kept, report] = filter_corpus(build_manifest({shard}), FilterPolicy{},
                                        dir.path / "out", 1);
    for (const auto& [source, tally] : report.per_source) {
        CAPTURE(source);
        CHECK(tally.rate() == 0.0);
    }
    CHECK(kept.total_documents() == 5);
}

TEST_CASE("filtering is per-document: permuting input permutes output") {
    TempDir dir;
    std::vector<Document> docs;
    for (int i = 0; i < 40; ++i) {
        docs.push_back(doc(1 + i, i % 3 ? "C4" : "Wikipedia",
                           text_of_norm_len(i % 2 ? 150 : 260)));
    }

    auto run = [&](const std::vector<Document>& ordered, const fs::path& tag) {
        const auto shard = dir.path / (tag.string() + ".jsonl");
        ShardWriter w(shard);
        for (const auto& d : ordered) w.write(d);
        w.close();
        auto [kept, report] = filter_corpus(build_manifest({shard}), FilterPolicy{},
                                            dir.path / tag, 1);
        std::set<std::uint64_t> ids;
        ShardReader r(kept.shards[0], 0);
        while (auto d = r.next()) ids.insert(d->doc_id);
        return std::pair{ids, report.per_source};
    };

    auto [ids_a, report_a] = run(docs, "a");
    std::mt19937_64 rng(7);
    std::shuffle(docs.begin(), docs.end(), rng);
    auto [ids_b, report_b] = run(docs, "b");

    CHECK(ids_a == ids_b);
    for (const auto& [source, tally] : report_a) {
        CHECK(report_b.at(source).kept == tally.kept);
        CHECK(report_b.at(source).dropped == tally.dropped);
    }
}

TEST_CASE("kept plus dropped equals input count per source") {
    TempDir dir;
    const auto shard = dir.path / "in.jsonl";
    std::map<std::string, int> input_counts;
    {
        ShardWriter w(shard);
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<int> len(0, 400);
        const char* sources[] = {"C4", "ArXiv", "Books", "StackExchange"};
        for (int i = 0; i < 200; ++i) {
            const std::string src = sources[i % 4];
            w.write(doc(1 + i, src, text_of_norm_len(len(rng))));
            input_counts[src] += 1;
        }
        w.close();
    }
    auto [kept, report] = filter_corpus(build_manifest({shard}), FilterPolicy{},
                                        dir.path / "out", 2);
    for (const auto& [source, tally] : report.per_source) {
        CHECK(tally.kept + tally.dropped == static_cast<std::uint64_t>(input_counts[source]));
    }
}
