#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pforge/corpus_io.hpp"
#include "pforge/normalize.hpp"
#include "pforge/parallel.hpp"

// Drops documents whose normalized form is shorter than a character
// threshold. Exempt sources (book and code corpora, where short documents
// are useful) are kept regardless of length. Source labels compare
// case-insensitively so "Github" and "GitHub" name the same exemption.

namespace pforge {

namespace detail {

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c += 0x20;
    }
    return out;
}

} // namespace detail

struct FilterPolicy {
    std::uint64_t min_chars = 200;
    std::set<std::string> exempt_sources = {"Books", "Github"};

    bool is_exempt(std::string_view source) const {
        const std::string folded = detail::ascii_lower(source);
        for (const auto& s : exempt_sources) {
            if (detail::ascii_lower(s) == folded) return true;
        }
        return false;
    }
};

struct FilterReport {
    struct Tally {
        std::uint64_t kept = 0;
        std::uint64_t dropped = 0;

        double rate() const {
            const std::uint64_t total = kept + dropped;
            return total == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(total);
        }
    };

    std::map<std::string, Tally> per_source;

    Tally total() const {
        Tally t;
        for (const auto& [_, tally] : per_source) {
            t.kept += tally.kept;
            t.dropped += tally.dropped;
        }
        return t;
    }

    CsvReport to_table() const {
        CsvReport table;
        table.header = {"Data source", "Document filter rate"};
        for (const auto& [source, tally] : per_source) {
            table.rows.push_back({source, format_percent(tally.rate())});
        }
        table.rows.push_back({"Total", format_percent(total().rate())});
        return table;
    }
};

// Keep iff the source is exempt or the normalized text has at least
// min_chars scalar values. The comparison is strictly-less for dropping: a
// document at exactly min_chars stays.
inline bool should_keep(const Document& doc, const FilterPolicy& policy) {
    if (policy.is_exempt(doc.source)) return true;
    return normalize_for_filter(doc.text).char_len >= policy.min_chars;
}

// Filters every shard of `manifest` into `out_dir` (one output shard per
// input shard, order preserved) and reports per-source filter rates.
inline std::pair<CorpusManifest, FilterReport> filter_corpus(
    const CorpusManifest& manifest, const FilterPolicy& policy,
    const std::filesystem::path& out_dir, unsigned workers = 1) {
    std::filesystem::create_directories(out_dir);

    struct ShardResult {
        std::filesystem::path path;
        std::map<std::string, SourceStats> kept;
        std::map<std::string, FilterReport::Tally> tallies;
    };

    std::vector<ShardResult> results(manifest.shards.size());
    parallel_for(manifest.shards.size(), workers, [&](std::size_t i) {
        char name[32];
        std::snprintf(name, sizeof(name), "shard-%05zu.jsonl", i);
        ShardResult& res = results[i];
        res.path = out_dir / name;

        ShardReader reader(manifest.shards[i], static_cast<std::uint32_t>(i));
        ShardWriter writer(res.path);
        while (auto doc = reader.next()) {
            auto& tally = res.tallies[doc->source];
            if (should_keep(*doc, policy)) {
                tally.kept += 1;
                writer.write(*doc);
            } else {
                tally.dropped += 1;
            }
        }
        writer.close();
        res.kept = writer.source_stats();
    });

    CorpusManifest kept;
    FilterReport report;
    for (auto& res : results) {
        kept.shards.push_back(res.path);
        for (const auto& [source, stats] : res.kept) {
            kept.sources[source].documents += stats.documents;
            kept.sources[source].bytes += stats.bytes;
        }
        for (const auto& [source, tally] : res.tallies) {
            auto& agg = report.per_source[source];
            agg.kept += tally.kept;
            agg.dropped += tally.dropped;
        }
    }
    return {std::move(kept), std::move(report)};
}

} // namespace pforge
