#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pforge/corpus_io.hpp"
#include "pforge/hash.hpp"
#include "pforge/minhash.hpp"
#include "pforge/parallel.hpp"

// Banded LSH over MinHash signatures. A signature of k values splits into b
// bands of r rows; documents colliding in any band become candidate pairs,
// which are then verified against the signature Jaccard estimate. Bands can
// be processed in multiple passes over the signature set, bounding peak
// memory to O(docs x bands_per_pass) bucket entries.

namespace pforge {

struct LshParams {
    std::uint32_t bands = 16;
    std::uint32_t rows = 8;
    double threshold = 0.8;

    void validate(std::uint32_t k) const {
        if (bands == 0 || rows == 0 || bands * rows != k) {
            throw std::invalid_argument("lsh: bands x rows must equal signature length");
        }
        if (!(threshold > 0.0 && threshold <= 1.0)) {
            throw std::invalid_argument("lsh: threshold must be in (0, 1]");
        }
    }

    // Probability that a pair with true Jaccard j collides in at least one
    // band: 1 - (1 - j^rows)^bands.
    double candidate_probability(double j) const {
        return 1.0 - std::pow(1.0 - std::pow(j, static_cast<double>(rows)),
                              static_cast<double>(bands));
    }
};

// One (band_index, bucket_hash) key per band.
inline std::vector<std::pair<std::uint32_t, std::uint64_t>> band_keys(
    const MinHashSignature& sig, const LshParams& params) {
    params.validate(static_cast<std::uint32_t>(sig.values.size()));

    std::vector<std::pair<std::uint32_t, std::uint64_t>> keys;
    keys.reserve(params.bands);
    for (std::uint32_t band = 0; band < params.bands; ++band) {
        keys.emplace_back(band, hash64(sig.values.data() + band * params.rows,
                                       params.rows * sizeof(std::uint64_t),
                                       0x62616e64ULL + band));
    }
    return keys;
}

namespace detail {

inline std::uint64_t band_bucket(std::span<const std::uint64_t> row,
                                 std::uint32_t band, std::uint32_t rows) {
    return hash64(row.data() + band * rows, rows * sizeof(std::uint64_t),
                  0x62616e64ULL + band);
}

} // namespace detail

// Emits every pair of distinct documents whose signatures collide in some
// band and whose estimated Jaccard is >= threshold. Pairs come out sorted by
// (min id, max id) and deduplicated; the result is independent of the pass
// count and worker count.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> find_duplicate_pairs(
    const SignatureSet& sigs, const LshParams& params, std::uint32_t passes = 1,
    unsigned workers = 1) {
    params.validate(sigs.params.k);
    const std::size_t n = sigs.size();
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    if (n < 2) return pairs;

    if (passes == 0) passes = 1;
    passes = std::min(passes, params.bands);
    const std::uint32_t bands_per_pass = (params.bands + passes - 1) / passes;

    struct Entry {
        std::uint64_t bucket;
        std::uint32_t band;
        std::uint32_t doc;
    };

    for (std::uint32_t pass = 0; pass < passes; ++pass) {
        const std::uint32_t band_begin = pass * bands_per_pass;
        const std::uint32_t band_end = std::min(params.bands, band_begin + bands_per_pass);
        if (band_begin >= band_end) break;
        const std::uint32_t nbands = band_end - band_begin;

        std::vector<Entry> entries(static_cast<std::size_t>(n) * nbands);
        parallel_for(n, workers, [&](std::size_t i) {
            const auto row = sigs.row(i);
            for (std::uint32_t b = 0; b < nbands; ++b) {
                entries[i * nbands + b] = Entry{
                    detail::band_bucket(row, band_begin + b, params.rows),
                    band_begin + b, static_cast<std::uint32_t>(i)};
            }
        });

        std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
            if (a.band != b.band) return a.band < b.band;
            if (a.bucket != b.bucket) return a.bucket < b.bucket;
            return a.doc < b.doc;
        });

        // Group boundaries, then verify all in-bucket pairs in parallel.
        std::vector<std::pair<std::size_t, std::size_t>> groups;
        std::size_t start = 0;
        for (std::size_t i = 1; i <= entries.size(); ++i) {
            if (i == entries.size() || entries[i].band != entries[start].band ||
                entries[i].bucket != entries[start].bucket) {
                if (i - start >= 2) groups.emplace_back(start, i);
                start = i;
            }
        }

        std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> found(groups.size());
        parallel_for(groups.size(), workers, [&](std::size_t g) {
            const auto [lo, hi] = groups[g];
            for (std::size_t i = lo; i < hi; ++i) {
                for (std::size_t j = i + 1; j < hi; ++j) {
                    const std::uint32_t a = entries[i].doc;
                    const std::uint32_t b = entries[j].doc;
                    if (sigs.estimate(a, b) >= params.threshold) {
                        const std::uint64_t ida = sigs.doc_ids[a];
                        const std::uint64_t idb = sigs.doc_ids[b];
                        found[g].emplace_back(std::min(ida, idb), std::max(ida, idb));
                    }
                }
            }
        });
        for (auto& chunk : found) {
            pairs.insert(pairs.end(), chunk.begin(), chunk.end());
        }
    }

    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

// Partition of a corpus into near-duplicate equivalence classes. The
// representative of each class is its smallest doc_id and maps to itself.
struct DuplicateClusterSet {
    std::unordered_map<std::uint64_t, std::uint64_t> representative;

    bool contains(std::uint64_t doc_id) const {
        return representative.find(doc_id) != representative.end();
    }

    std::uint64_t representative_of(std::uint64_t doc_id) const {
        auto it = representative.find(doc_id);
        if (it == representative.end()) {
            throw std::out_of_range("cluster set: unknown doc_id " + std::to_string(doc_id));
        }
        return it->second;
    }

    bool is_representative(std::uint64_t doc_id) const {
        return representative_of(doc_id) == doc_id;
    }

    // rep -> sorted members, including singletons.
    std::map<std::uint64_t, std::vector<std::uint64_t>> clusters() const {
        std::map<std::uint64_t, std::vector<std::uint64_t>> out;
        for (const auto& [doc, rep] : representative) out[rep].push_back(doc);
        for (auto& [_, members] : out) std::sort(members.begin(), members.end());
        return out;
    }

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw CorpusError("cannot write cluster file: " + path.string());
        out << "doc_id,representative_id\n";
        std::vector<std::uint64_t> ids;
        ids.reserve(representative.size());
        for (const auto& [doc, _] : representative) ids.push_back(doc);
        std::sort(ids.begin(), ids.end());
        for (const std::uint64_t id : ids) {
            out << id << ',' << representative.at(id) << '\n';
        }
        if (!out) throw CorpusError("write failed: " + path.string());
    }

    static DuplicateClusterSet load_csv(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CorpusError("cannot open cluster file: " + path.string());
        DuplicateClusterSet set;
        std::string line;
        std::uint64_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line_no == 1 || line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) {
                throw CorpusError(path.string() + ": malformed cluster row at line " +
                                  std::to_string(line_no));
            }
            set.representative[std::stoull(line.substr(0, comma))] =
                std::stoull(line.substr(comma + 1));
        }
        return set;
    }
};

// Connected components of the pair graph over the given document universe.
inline DuplicateClusterSet cluster(std::span<const std::uint64_t> doc_ids,
                                   std::span<const std::pair<std::uint64_t, std::uint64_t>> pairs) {
    std::unordered_map<std::uint64_t, std::uint64_t> parent;
    parent.reserve(doc_ids.size());
    for (const std::uint64_t id : doc_ids) parent.emplace(id, id);

    auto find = [&parent](std::uint64_t x) {
        auto it = parent.find(x);
        if (it == parent.end()) {
            throw std::out_of_range("cluster: pair references unknown doc_id " + std::to_string(x));
        }
        while (it->second != x) {
            const auto next = parent.find(it->second);
            it->second = next->second; // path halving
            x = it->second;
            it = parent.find(x);
        }
        return x;
    };

    for (const auto& [a, b] : pairs) {
        const std::uint64_t ra = find(a);
        const std::uint64_t rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }

    // Roots are already component minima because unions always point the
    // larger root at the smaller one.
    DuplicateClusterSet set;
    set.representative.reserve(doc_ids.size());
    for (const std::uint64_t id : doc_ids) set.representative[id] = find(id);
    return set;
}

struct DedupReport {
    struct Tally {
        std::uint64_t total_bytes = 0;
        std::uint64_t duplicate_bytes = 0;

        double rate() const {
            return total_bytes == 0
                       ? 0.0
                       : static_cast<double>(duplicate_bytes) / static_cast<double>(total_bytes);
        }
    };

    std::map<std::string, Tally> per_source;

    Tally total() const {
        Tally t;
        for (const auto& [_, tally] : per_source) {
            t.total_bytes += tally.total_bytes;
            t.duplicate_bytes += tally.duplicate_bytes;
        }
        return t;
    }

    CsvReport to_table() const {
        CsvReport table;
        table.header = {"Data source", "Byte duplication rate"};
        for (const auto& [source, tally] : per_source) {
            table.rows.push_back({source, format_percent(tally.rate())});
        }
        table.rows.push_back({"Total", format_percent(total().rate())});
        return table;
    }
};

// Rewrites the corpus keeping exactly the cluster representatives, and
// reports the byte share of removed documents per source. Every document in
// the corpus must be covered by the cluster set.
inline std::pair<CorpusManifest, DedupReport> deduplicate(
    const CorpusManifest& manifest, const DuplicateClusterSet& clusters,
    const std::filesystem::path& out_dir, unsigned workers = 1) {
    std::filesystem::create_directories(out_dir);

    struct ShardResult {
        std::filesystem::path path;
        std::map<std::string, SourceStats> kept;
        std::map<std::string, DedupReport::Tally> tallies;
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
            tally.total_bytes += doc->byte_len;
            if (clusters.representative_of(doc->doc_id) == doc->doc_id) {
                writer.write(*doc);
            } else {
                tally.duplicate_bytes += doc->byte_len;
            }
        }
        writer.close();
        res.kept = writer.source_stats();
    });

    CorpusManifest kept;
    DedupReport report;
    for (auto& res : results) {
        kept.shards.push_back(res.path);
        for (const auto& [source, stats] : res.kept) {
            kept.sources[source].documents += stats.documents;
            kept.sources[source].bytes += stats.bytes;
        }
        for (const auto& [source, tally] : res.tallies) {
            auto& agg = report.per_source[source];
            agg.total_bytes += tally.total_bytes;
            agg.duplicate_bytes += tally.duplicate_bytes;
        }
    }
    return {std::move(kept), std::move(report)};
}

} // namespace pforge
