#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "pforge/corpus_io.hpp"
#include "pforge/mixture.hpp"

using namespace pforge;
namespace fs = std::filesystem;

namespace {

const std::string kBin = PFORGE_CLI_BIN;
const fs::path kFixtureDir = fs::path(PFORGE_TEST_DATA_DIR) / "bpe";

struct TempDir {
    fs::path path;
    TempDir() {
        static int n = 0;
        path = fs::temp_directory_path() /
               ("pforge-cli-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
    const auto out_path = dir.path / "stdout.txt";
    const auto err_path = dir.path / "stderr.txt";
    const std::string cmd = kBin + " " + args + " > " + out_path.string() + " 2> " +
                            err_path.string();
    const int status = std::system(cmd.c_str());

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>()};
    };
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small two-source corpus with planted duplicates and short documents.
fs::path make_corpus(const fs::path& dir) {
    fs::create_directories(dir);
    auto doc = [](std::uint64_t id, std::string source, std::string text) {
        Document d;
        d.doc_id = id;
        d.source = std::move(source);
        d.text = std::move(text);
        d.byte_len = d.text.size();
        return d;
    };

    std::string longtext = "alpha beta gamma delta epsilon zeta eta theta iota kappa ";
    for (int i = 0; i < 3; ++i) longtext += longtext;

    std::vector<fs::path> shards;
    for (int s = 0; s < 2; ++s) {
        const auto shard = dir / ("shard-" + std::to_string(s) + ".jsonl");
        ShardWriter w(shard);
        for (int i = 0; i < 30; ++i) {
            const std::uint64_t id = s * 1000 + i + 1;
            const std::string source = (i % 2 == 0) ? "CommonCrawl" : "Wikipedia";
            if (i < 4) {
                w.write(doc(id, source, "too short"));
            } else if (i < 8) {
                w.write(doc(id, source, longtext)); // cross-shard duplicates
            } else {
                w.write(doc(id, source,
                            longtext + " unique tail " + std::to_string(id) + " " +
                                std::to_string(id * 7)));
            }
        }
        w.close();
        shards.push_back(shard);
    }

    auto manifest = build_manifest(shards);
    for (auto& p : manifest.shards) p = p.filename();
    manifest.save(dir / "manifest.json");
    return dir / "manifest.json";
}

} // namespace

TEST_CASE("cli: unknown flags produce usage text on stderr and exit 1") {
    TempDir dir;
    const auto r = run_cli(dir, "dedup --nonsense");
    CHECK(r.exit_code == 1);
    CHECK(r.out.empty());
    CHECK(r.err.find("Usage") != std::string::npos);

    const auto r2 = run_cli(dir, "");
    CHECK(r2.exit_code == 1);

    const auto help = run_cli(dir, "--help");
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("pipeline") != std::string::npos);
}

TEST_CASE("cli: data errors exit 2") {
    TempDir dir;
    const auto r = run_cli(dir, "filter --manifest /nonexistent.json --out " +
                                    (dir.path / "out").string());
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("cli: rrgs prints three variant lines") {
    TempDir dir;
    write_file(dir.path / "scores.csv", "item,score\na,27.0\nb,23.0\nc,25.0\n");
    const auto r = run_cli(dir, "rrgs --scores " + (dir.path / "scores.csv").string());
    CHECK(r.exit_code == 0);
    CHECK(r.out == "pos=0.980000\nneg=0.980000\nall=0.986667\n");
}

TEST_CASE("cli: rrgs prints nan for an empty variant") {
    TempDir dir;
    write_file(dir.path / "scores.csv", "a,0.30\nb,0.40\n");
    const auto r = run_cli(dir, "rrgs --scores " + (dir.path / "scores.csv").string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("neg=nan") != std::string::npos);
}

TEST_CASE("cli: schedule emits csv to stdout") {
    TempDir dir;
    const auto r = run_cli(dir, "schedule --steps 6");
    CHECK(r.exit_code == 0);
    CHECK(r.out == "step,weight_decay\n0,0\n1,0\n2,0.5\n3,0.5\n4,0.1\n5,0.1\n");
}

TEST_CASE("cli: mix with builtin config writes a plan that sums to the budget") {
    TempDir dir;
    nlohmann::json inv;
    for (const char* s : {"Commoncrawl", "C4", "GitHub", "Books", "ArXiv", "Wikipedia",
                          "StackExchange"}) {
        inv[s] = 400'000'000'000ULL;
    }
    write_file(dir.path / "inv.json", inv.dump());

    const auto r = run_cli(dir, "mix --config DC-6 --inventory " +
                                    (dir.path / "inv.json").string() + " --out " +
                                    dir.path.string());
    REQUIRE(r.exit_code == 0);

    std::ifstream in(dir.path / "plan.json");
    nlohmann::json plan;
    in >> plan;
    std::uint64_t total = 0;
    for (const auto& [_, s] : plan.at("sources").items()) {
        total += s.at("target_tokens").get<std::uint64_t>();
    }
    CHECK(total == 330'000'000'000ULL);
    CHECK(plan.at("name") == "DC-6");
}

TEST_CASE("cli: mix with doc-level inventory materializes an order file") {
    TempDir dir;
    nlohmann::json inv;
    inv["A"] = {{"total", 100},
                {"docs", nlohmann::json::array({{1, 10}, {2, 10}, {3, 10}, {4, 10}})}};
    write_file(dir.path / "inv.json", inv.dump());
    write_file(dir.path / "cfg.json",
               R"({"name":"solo","budget_tokens":40,"proportions":{"A":1.0},"seed":5})");

    const auto r = run_cli(dir, "mix --config " + (dir.path / "cfg.json").string() +
                                    " --inventory " + (dir.path / "inv.json").string() +
                                    " --out " + dir.path.string());
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir.path / "plan_order.bin"));
    CHECK(fs::file_size(dir.path / "plan_order.bin") == 8 + 8 + 4 * 8);
}

TEST_CASE("cli: pipeline equals stage-by-stage runs byte for byte") {
    TempDir dir;
    const auto manifest = make_corpus(dir.path / "corpus");
    const std::string model_flags =
        " --vocab " + (kFixtureDir / "vocab.json").string() +
        " --merges " + (kFixtureDir / "merges.txt").string();

    // One-shot pipeline.
    const auto pipe_out = dir.path / "pipe";
    const auto r1 = run_cli(dir, "pipeline --manifest " + manifest.string() + " --out " +
                                     pipe_out.string() + model_flags + " --workers 2");
    REQUIRE(r1.exit_code == 0);

    // Stage by stage on intermediate outputs.
    const auto stage_out = dir.path / "stage";
    REQUIRE(run_cli(dir, "filter --manifest " + manifest.string() + " --out " +
                             stage_out.string() + " --workers 1")
                .exit_code == 0);
    REQUIRE(run_cli(dir, "dedup --manifest " + (stage_out / "filtered_manifest.json").string() +
                             " --out " + stage_out.string() + " --workers 4")
                .exit_code == 0);
    REQUIRE(run_cli(dir, "stats --manifest " + (stage_out / "deduped_manifest.json").string() +
                             " --out " + stage_out.string() + model_flags + " --workers 2")
                .exit_code == 0);

    const char* artifacts[] = {
        "filter_report.csv", "filtered_manifest.json", "signatures.bin",
        "clusters.csv",      "dedup_report.csv",       "deduped_manifest.json",
        "kl_all.csv",        "kl_letters.csv",
    };
    for (const char* name : artifacts) {
        CAPTURE(name);
        REQUIRE(fs::exists(pipe_out / name));
        REQUIRE(fs::exists(stage_out / name));
        CHECK(read_file(pipe_out / name) == read_file(stage_out / name));
    }

    // Shard contents match too.
    for (const char* sub : {"filtered", "deduped"}) {
        for (const auto& entry : fs::directory_iterator(pipe_out / sub)) {
            const auto rel = entry.path().filename();
            CAPTURE(rel.string());
            CHECK(read_file(entry.path()) == read_file(stage_out / sub / rel));
        }
    }

    // The pipeline run actually dropped the short docs and the duplicates.
    const auto kept = CorpusManifest::load(pipe_out / "deduped_manifest.json");
    CHECK(kept.total_documents() < 60);
    const auto filter_report = read_file(pipe_out / "filter_report.csv");
    CHECK(filter_report.find("Data source,Document filter rate") == 0);
}

TEST_CASE("cli: dedup is deterministic across worker counts and passes") {
    TempDir dir;
    const auto manifest = make_corpus(dir.path / "corpus");

    auto dedup_run = [&](const std::string& tag, const std::string& extra) {
        const auto out = dir.path / tag;
        REQUIRE(run_cli(dir, "dedup --manifest " + manifest.string() + " --out " +
                                 out.string() + extra)
                    .exit_code == 0);
        return read_file(out / "clusters.csv") + "|" + read_file(out / "dedup_report.csv") +
               "|" + read_file(out / "signatures.bin");
    };

    const auto base = dedup_run("w1", " --workers 1");
    CHECK(base == dedup_run("w4", " --workers 4"));
    CHECK(base == dedup_run("p4", " --workers 2 --passes 4"));
}
