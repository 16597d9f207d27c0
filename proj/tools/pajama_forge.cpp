// pajama-forge: corpus preparation pipeline. Subcommands cover low-length
// filtering, global MinHashLSH deduplication, token-distribution statistics,
// mixture planning, the RRGS metric and the progressive weight-decay
// schedule; `pipeline` chains filter -> dedup -> stats. Progress goes to
// stderr (PAJAMA_FORGE_LOG selects the level); stdout carries only
// machine-readable results. Exit codes: 0 success, 1 usage error, 2 data
// error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pforge/corpus_io.hpp"
#include "pforge/eval_metrics.hpp"
#include "pforge/log.hpp"
#include "pforge/lowlen_filter.hpp"
#include "pforge/lsh_dedup.hpp"
#include "pforge/minhash.hpp"
#include "pforge/mixture.hpp"
#include "pforge/normalize.hpp"
#include "pforge/parallel.hpp"
#include "pforge/ptwd.hpp"
#include "pforge/token_stats.hpp"
#include "pforge/tokenizer.hpp"

namespace fs = std::filesystem;
using namespace pforge;

namespace {

struct DedupOptions {
    std::uint64_t seed = 0;
    std::uint32_t perms = 128;
    std::uint32_t shingle_n = 13;
    std::uint32_t bands = 16;
    std::uint32_t rows = 8;
    double threshold = 0.8;
    std::uint32_t passes = 1;
};

FilterPolicy load_policy(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open policy: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError("invalid policy json: " + std::string(e.what()));
    }
    FilterPolicy policy;
    if (j.contains("min_chars")) policy.min_chars = j.at("min_chars").get<std::uint64_t>();
    if (j.contains("exempt_sources")) {
        policy.exempt_sources.clear();
        for (const auto& s : j.at("exempt_sources")) {
            policy.exempt_sources.insert(s.get<std::string>());
        }
    }
    return policy;
}

// Relativize shard paths against the manifest location so identical runs
// into different output directories stay byte-identical.
void save_manifest_relative(CorpusManifest manifest, const fs::path& path) {
    const fs::path base = path.parent_path();
    for (auto& shard : manifest.shards) {
        const fs::path rel = shard.lexically_proximate(base);
        if (!rel.empty()) shard = rel;
    }
    manifest.save(path);
}

CorpusManifest run_filter_stage(const CorpusManifest& manifest, const FilterPolicy& policy,
                                const fs::path& out_dir, unsigned workers) {
    log::info("filter: %zu shard(s), min_chars=%llu", manifest.shards.size(),
              static_cast<unsigned long long>(policy.min_chars));
    auto [kept, report] = filter_corpus(manifest, policy, out_dir / "filtered", workers);
    write_report(report.to_table(), out_dir / "filter_report.csv");
    save_manifest_relative(kept, out_dir / "filtered_manifest.json");
    const auto total = report.total();
    log::info("filter: kept %llu, dropped %llu",
              static_cast<unsigned long long>(total.kept),
              static_cast<unsigned long long>(total.dropped));
    return kept;
}

// Upper bound on records in a shard; lets signature buffers be sized up
// front instead of growth-doubling through hundreds of megabytes.
std::size_t count_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot open shard: " + path.string());
    std::vector<char> buf(1 << 20);
    std::size_t lines = 0;
    while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || in.gcount() > 0) {
        lines += static_cast<std::size_t>(
            std::count(buf.data(), buf.data() + in.gcount(), '\n'));
    }
    return lines + 1;
}

SignatureSet compute_signatures(const CorpusManifest& manifest, const MinHashParams& params,
                                unsigned workers) {
    struct ShardSigs {
        std::vector<std::uint64_t> ids;
        std::vector<std::uint64_t> values;
    };
    std::vector<ShardSigs> per_shard(manifest.shards.size());

    parallel_for(manifest.shards.size(), workers, [&](std::size_t i) {
        const std::size_t line_bound = count_lines(manifest.shards[i]);
        SignatureBuilder builder(params);
        ShardReader reader(manifest.shards[i], static_cast<std::uint32_t>(i));
        auto& out = per_shard[i];
        out.ids.reserve(line_bound);
        out.values.reserve(line_bound * params.k);
        while (auto doc = reader.next()) {
            const auto norm = normalize_for_dedup(doc->text);
            const auto sh = shingles(norm, params.shingle);
            const auto sig = builder.sign(sh);
            out.ids.push_back(doc->doc_id);
            out.values.insert(out.values.end(), sig.values.begin(), sig.values.end());
        }
    });

    SignatureSet set;
    set.params = params;
    std::size_t total = 0;
    for (const auto& s : per_shard) total += s.ids.size();
    set.doc_ids.reserve(total);
    set.values.reserve(total * params.k);
    for (auto& s : per_shard) {
        set.doc_ids.insert(set.doc_ids.end(), s.ids.begin(), s.ids.end());
        set.values.insert(set.values.end(), s.values.begin(), s.values.end());
        s = ShardSigs{};
    }
    return set;
}

CorpusManifest run_dedup_stage(const CorpusManifest& manifest, const DedupOptions& opt,
                               const fs::path& out_dir, unsigned workers) {
    MinHashParams params;
    params.k = opt.perms;
    params.shingle.n = opt.shingle_n;
    params.shingle.seed = opt.seed;

    LshParams lsh;
    lsh.bands = opt.bands;
    lsh.rows = opt.rows;
    lsh.threshold = opt.threshold;
    lsh.validate(params.k);

    log::info("dedup: signing %llu document(s), k=%u",
              static_cast<unsigned long long>(manifest.total_documents()), params.k);
    SignatureSet sigs = compute_signatures(manifest, params, workers);
    sigs.save(out_dir / "signatures.bin");

    log::info("dedup: banding %zu signature(s), b=%u r=%u passes=%u", sigs.size(), lsh.bands,
              lsh.rows, opt.passes);
    const auto pairs = find_duplicate_pairs(sigs, lsh, opt.passes, workers);
    log::info("dedup: %zu duplicate pair(s) at threshold %.2f", pairs.size(), lsh.threshold);

    const auto clusters = cluster(sigs.doc_ids, pairs);
    clusters.save_csv(out_dir / "clusters.csv");

    auto [kept, report] = deduplicate(manifest, clusters, out_dir / "deduped", workers);
    write_report(report.to_table(), out_dir / "dedup_report.csv");
    save_manifest_relative(kept, out_dir / "deduped_manifest.json");
    log::info("dedup: kept %llu document(s)",
              static_cast<unsigned long long>(kept.total_documents()));
    return kept;
}

void run_stats_stage(const CorpusManifest& manifest, const BpeModel& model,
                     const fs::path& out_dir, const std::string& subset_arg, unsigned workers) {
    const auto by_source = count_tokens_by_source(manifest, model, workers);
    if (by_source.size() < 2) {
        throw CorpusError("stats: need at least two sources for a divergence matrix");
    }

    std::vector<TokenDistribution> base;
    base.reserve(by_source.size());
    for (const auto& [_, dist] : by_source) base.push_back(dist);

    std::vector<SubsetRule> rules;
    if (subset_arg.empty()) {
        rules = {SubsetRule::all,        SubsetRule::letters_only,
                 SubsetRule::top1000_union, SubsetRule::numeric_ops,
                 SubsetRule::whitespace, SubsetRule::non_alphanumeric};
    } else {
        rules = {parse_subset(subset_arg)};
    }

    for (const SubsetRule rule : rules) {
        std::vector<TokenDistribution> dists;
        if (rule == SubsetRule::top1000_union) {
            const auto ids = top_frequency_union(base);
            for (const auto& dist : base) {
                dists.push_back(restrict_to_ids(dist, ids, subset_name(rule)));
            }
        } else {
            for (const auto& dist : base) dists.push_back(apply_subset(dist, rule, model));
        }

        const bool empty_support =
            std::any_of(dists.begin(), dists.end(), [](const auto& d) { return d.total == 0; });
        if (empty_support) {
            log::warn("stats: subset %s has an empty source, skipping matrix",
                      std::string(subset_name(rule)).c_str());
            continue;
        }

        const auto matrix = kl_matrix(dists);
        const fs::path out = out_dir / ("kl_" + std::string(subset_name(rule)) + ".csv");
        matrix.save_csv(out);
        log::info("stats: wrote %s", out.string().c_str());
    }
}

int run_rrgs(const fs::path& scores_path) {
    const ScoreVector scores = load_scores(scores_path);
    auto print = [&scores](const char* label, RrgsVariant variant) {
        try {
            std::printf("%s=%.6f\n", label, rrgs(scores, variant));
        } catch (const ScoreError&) {
            std::printf("%s=nan\n", label);
        }
    };
    print("pos", RrgsVariant::pos);
    print("neg", RrgsVariant::neg);
    print("all", RrgsVariant::all);
    return 0;
}

struct InventoryFile {
    std::map<std::string, std::uint64_t> totals;
    std::map<std::string, std::vector<DocEntry>> docs;
    bool has_docs = false;
};

// {"Source": tokens} or {"Source": {"total": n, "docs": [[doc_id, tokens], ...]}}
InventoryFile load_inventory(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MixtureError("cannot open inventory: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw MixtureError("invalid inventory json: " + std::string(e.what()));
    }
    if (!j.is_object()) throw MixtureError("inventory must be a JSON object");

    InventoryFile inv;
    for (const auto& [source, value] : j.items()) {
        if (value.is_number_unsigned()) {
            inv.totals[source] = value.get<std::uint64_t>();
            continue;
        }
        if (!value.is_object()) {
            throw MixtureError("inventory entry for " + source + " must be a count or object");
        }
        inv.totals[source] = value.at("total").get<std::uint64_t>();
        if (value.contains("docs")) {
            inv.has_docs = true;
            auto& list = inv.docs[source];
            for (const auto& row : value.at("docs")) {
                list.push_back(DocEntry{row.at(0).get<std::uint64_t>(),
                                        row.at(1).get<std::uint64_t>()});
            }
        }
    }
    return inv;
}

int run_mix(const std::string& config_arg, const fs::path& inventory_path,
            const fs::path& out_dir, std::uint64_t seed, bool seed_set) {
    MixtureConfig config;
    const auto builtins = MixtureConfig::builtin_names();
    if (std::find(builtins.begin(), builtins.end(), config_arg) != builtins.end()) {
        config = MixtureConfig::builtin(config_arg);
    } else {
        config = MixtureConfig::load(config_arg);
    }
    if (!seed_set) seed = config.seed;

    const InventoryFile inv = load_inventory(inventory_path);
    const MixturePlan plan = build_plan(config, inv.totals, seed);
    fs::create_directories(out_dir);
    plan.save_json(out_dir / "plan.json");
    log::info("mix: wrote %s", (out_dir / "plan.json").string().c_str());

    if (inv.has_docs) {
        const auto order = materialize(plan, inv.docs);
        save_order(order, out_dir / "plan_order.bin");
        log::info("mix: wrote order of %zu document(s)", order.size());
    }
    return 0;
}

int run_schedule(const std::string& config_path, std::uint64_t steps, const fs::path& out_dir) {
    PtwdSchedule schedule;
    if (!config_path.empty()) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ScheduleError("cannot open schedule config: " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ScheduleError("invalid schedule json: " + std::string(e.what()));
        }
        schedule = PtwdSchedule::from_json(j);
    } else {
        if (steps == 0) throw ScheduleError("schedule: provide --config or --steps");
        schedule = PtwdSchedule::thirds(steps);
    }

    if (out_dir.empty()) {
        schedule.write_csv(std::cout);
    } else {
        fs::create_directories(out_dir);
        schedule.write_csv(out_dir / "schedule.csv");
        log::info("schedule: wrote %s", (out_dir / "schedule.csv").string().c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pajama-forge: corpus filtering, global deduplication, token statistics,\n"
                 "mixture planning and training-schedule utilities"};
    app.require_subcommand(1);

    std::string manifest_path, out_dir, policy_path, config_arg, inventory_path;
    std::string vocab_path, merges_path, subset, scores_path, schedule_config;
    unsigned workers = default_workers();
    std::uint64_t seed = 0;
    std::uint64_t steps = 0;
    DedupOptions dedup_opt;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd, bool needs_manifest) {
        if (needs_manifest) {
            cmd->add_option("--manifest", manifest_path, "corpus manifest JSON")->required();
            cmd->add_option("--workers", workers, "worker thread count");
        }
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto* filter_cmd = app.add_subcommand("filter", "drop low-length documents");
    add_common(filter_cmd, true);
    filter_cmd->add_option("--policy", policy_path, "filter policy JSON");

    auto add_dedup_flags = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "hash seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--perms", dedup_opt.perms, "signature length k");
        cmd->add_option("--bands", dedup_opt.bands, "LSH bands");
        cmd->add_option("--rows", dedup_opt.rows, "LSH rows per band");
        cmd->add_option("--threshold", dedup_opt.threshold, "Jaccard threshold");
        cmd->add_option("--passes", dedup_opt.passes, "band passes (memory bound)");
    };

    auto* dedup_cmd = app.add_subcommand("dedup", "global near-duplicate removal");
    add_common(dedup_cmd, true);
    add_dedup_flags(dedup_cmd);

    auto* stats_cmd = app.add_subcommand("stats", "token distributions and KL matrices");
    add_common(stats_cmd, true);
    stats_cmd->add_option("--vocab", vocab_path, "vocab.json")->required();
    stats_cmd->add_option("--merges", merges_path, "merges.txt")->required();
    stats_cmd->add_option("--subset", subset, "restrict to one token subset");

    auto* mix_cmd = app.add_subcommand("mix", "build a mixture sampling plan");
    mix_cmd->add_option("--config", config_arg, "builtin name (DC-1..DC-7, LBS) or JSON path")
        ->required();
    mix_cmd->add_option("--inventory", inventory_path, "per-source token inventory JSON")
        ->required();
    mix_cmd->add_option("--out", out_dir, "output directory")->required();
    mix_cmd->add_option("--seed", seed, "shuffle seed")->each([&](const std::string&) {
        seed_set = true;
    });

    auto* rrgs_cmd = app.add_subcommand("rrgs", "risk-of-random-guessing score");
    rrgs_cmd->add_option("--scores", scores_path, "CSV item,score")->required();

    auto* schedule_cmd = app.add_subcommand("schedule", "emit weight-decay schedule CSV");
    schedule_cmd->add_option("--config", schedule_config, "schedule JSON");
    schedule_cmd->add_option("--steps", steps, "total steps (default thirds schedule)");
    schedule_cmd->add_option("--out", out_dir, "output directory (default stdout)");

    auto* pipeline_cmd = app.add_subcommand("pipeline", "filter -> dedup -> stats");
    add_common(pipeline_cmd, true);
    pipeline_cmd->add_option("--policy", policy_path, "filter policy JSON");
    add_dedup_flags(pipeline_cmd);
    pipeline_cmd->add_option("--vocab", vocab_path, "vocab.json")->required();
    pipeline_cmd->add_option("--merges", merges_path, "merges.txt")->required();
    pipeline_cmd->add_option("--subset", subset, "restrict to one token subset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << app.help();
        return 1;
    }

    try {
        dedup_opt.seed = seed;

        if (app.got_subcommand(filter_cmd)) {
            const auto manifest = CorpusManifest::load(manifest_path);
            const FilterPolicy policy =
                policy_path.empty() ? FilterPolicy{} : load_policy(policy_path);
            fs::create_directories(out_dir);
            run_filter_stage(manifest, policy, out_dir, workers);
        } else if (app.got_subcommand(dedup_cmd)) {
            const auto manifest = CorpusManifest::load(manifest_path);
            fs::create_directories(out_dir);
            run_dedup_stage(manifest, dedup_opt, out_dir, workers);
        } else if (app.got_subcommand(stats_cmd)) {
            const auto manifest = CorpusManifest::load(manifest_path);
            const BpeModel model = load_bpe(vocab_path, merges_path);
            fs::create_directories(out_dir);
            run_stats_stage(manifest, model, out_dir, subset, workers);
        } else if (app.got_subcommand(mix_cmd)) {
            return run_mix(config_arg, inventory_path, out_dir, seed, seed_set);
        } else if (app.got_subcommand(rrgs_cmd)) {
            return run_rrgs(scores_path);
        } else if (app.got_subcommand(schedule_cmd)) {
            return run_schedule(schedule_config, steps, out_dir);
        } else if (app.got_subcommand(pipeline_cmd)) {
            const auto manifest = CorpusManifest::load(manifest_path);
            const FilterPolicy policy =
                policy_path.empty() ? FilterPolicy{} : load_policy(policy_path);
            const BpeModel model = load_bpe(vocab_path, merges_path);
            fs::create_directories(out_dir);
            const auto filtered = run_filter_stage(manifest, policy, out_dir, workers);
            const auto deduped = run_dedup_stage(filtered, dedup_opt, out_dir, workers);
            run_stats_stage(deduped, model, out_dir, subset, workers);
        }
    } catch (const std::exception& e) {
        log::error("%s", e.what());
        return 2;
    }
    return 0;
}
