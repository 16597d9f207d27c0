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
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pforge/corpus_io.hpp"
#include "pforge/parallel.hpp"
#include "pforge/tokenizer.hpp"
#include "pforge/unicode.hpp"

// Per-source token count distributions and the KL-divergence matrices
// between them, over the full vocabulary or over one of the token subsets
// (letter-only tokens, top-1000-frequency union, numbers and operators,
// whitespace tokens, non-alphanumeric tokens).

namespace pforge {

enum class SubsetRule {
    all,
    letters_only,
    top1000_union,
    numeric_ops,
    whitespace,
    non_alphanumeric,
};

inline std::string_view subset_name(SubsetRule rule) {
    switch (rule) {
        case SubsetRule::all: return "all";
        case SubsetRule::letters_only: return "letters";
        case SubsetRule::top1000_union: return "top1000";
        case SubsetRule::numeric_ops: return "numeric_ops";
        case SubsetRule::whitespace: return "whitespace";
        case SubsetRule::non_alphanumeric: return "non_alphanumeric";
    }
    return "all";
}

inline SubsetRule parse_subset(std::string_view name) {
    if (name == "all") return SubsetRule::all;
    if (name == "letters") return SubsetRule::letters_only;
    if (name == "top1000") return SubsetRule::top1000_union;
    if (name == "numeric_ops") return SubsetRule::numeric_ops;
    if (name == "whitespace") return SubsetRule::whitespace;
    if (name == "non_alphanumeric") return SubsetRule::non_alphanumeric;
    throw std::invalid_argument("unknown token subset: " + std::string(name));
}

struct TokenDistribution {
    std::string source;
    std::string subset = "all";
    std::unordered_map<std::uint32_t, std::uint64_t> counts;
    std::uint64_t total = 0;

    void add(std::uint32_t token_id, std::uint64_t n = 1) {
        counts[token_id] += n;
        total += n;
    }

    void merge(const TokenDistribution& other) {
        for (const auto& [id, n] : other.counts) add(id, n);
    }
};

// Counts tokens over every document of every source in one pass.
inline std::map<std::string, TokenDistribution> count_tokens_by_source(
    const CorpusManifest& manifest, const BpeModel& model, unsigned workers = 1) {
    std::vector<std::map<std::string, TokenDistribution>> per_shard(manifest.shards.size());

    parallel_for(manifest.shards.size(), workers, [&](std::size_t i) {
        BpeEncoder encoder(model);
        ShardReader reader(manifest.shards[i], static_cast<std::uint32_t>(i));
        auto& local = per_shard[i];
        while (auto doc = reader.next()) {
            auto& dist = local[doc->source];
            dist.source = doc->source;
            for (const std::uint32_t id : encoder.encode(doc->text)) dist.add(id);
        }
    });

    std::map<std::string, TokenDistribution> merged;
    for (const auto& shard_map : per_shard) {
        for (const auto& [source, dist] : shard_map) {
            auto& out = merged[source];
            out.source = source;
            out.merge(dist);
        }
    }
    return merged;
}

inline TokenDistribution count_tokens(const CorpusManifest& manifest, const BpeModel& model,
                                      const std::string& source, unsigned workers = 1) {
    auto all = count_tokens_by_source(manifest, model, workers);
    auto it = all.find(source);
    if (it == all.end()) {
        TokenDistribution empty;
        empty.source = source;
        return empty;
    }
    return std::move(it->second);
}

namespace detail {

// Decoded surface form with at most one leading space stripped; falls back
// to the undecoded form when stripping would leave nothing.
inline std::string subset_core(const BpeModel& model, std::uint32_t id) {
    std::string s = model.decode_token(id);
    if (!s.empty() && s.front() == ' ' && s.size() > 1) s.erase(s.begin());
    return s;
}

inline bool all_codepoints(std::string_view s, bool (*pred)(char32_t)) {
    if (s.empty()) return false;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!pred(uni::decode_next(s, i))) return false;
    }
    return true;
}

constexpr bool is_numeric_op_char(char32_t cp) {
    return (cp >= '0' && cp <= '9') || cp == '+' || cp == '-' || cp == 0x2212 ||
           cp == '*' || cp == '/' || cp == '=' || cp == '%' || cp == '<' ||
           cp == '>' || cp == '^';
}

constexpr bool not_alnum(char32_t cp) {
    return !uni::is_alnum(cp);
}

constexpr bool letter_pred(char32_t cp) { return uni::is_letter(cp); }
constexpr bool space_pred(char32_t cp) { return uni::is_pattern_space(cp); }

} // namespace detail

// Classifies one token's decoded surface form under a per-token rule.
// top1000_union is frequency-based, not per-token; see top_frequency_union.
inline bool token_matches_rule(const BpeModel& model, std::uint32_t id, SubsetRule rule) {
    switch (rule) {
        case SubsetRule::all:
            return true;
        case SubsetRule::letters_only:
            return detail::all_codepoints(detail::subset_core(model, id), detail::letter_pred);
        case SubsetRule::whitespace:
            return detail::all_codepoints(model.decode_token(id), detail::space_pred);
        case SubsetRule::numeric_ops:
            return detail::all_codepoints(detail::subset_core(model, id),
                                          detail::is_numeric_op_char);
        case SubsetRule::non_alphanumeric: {
            const std::string core = detail::subset_core(model, id);
            return detail::all_codepoints(core, detail::not_alnum) &&
                   !detail::all_codepoints(core, detail::space_pred);
        }
        case SubsetRule::top1000_union:
            throw std::invalid_argument("top1000_union is not a per-token rule");
    }
    return false;
}

// Union over all given sources of each source's 1000 most frequent token
// ids; ties break toward the lower token id. Result is sorted.
inline std::vector<std::uint32_t> top_frequency_union(
    std::span<const TokenDistribution> dists, std::size_t top_k = 1000) {
    if (dists.empty()) {
        throw std::invalid_argument("top1000_union requires at least one source");
    }
    std::vector<std::uint32_t> union_ids;
    for (const auto& dist : dists) {
        std::vector<std::pair<std::uint32_t, std::uint64_t>> by_count(dist.counts.begin(),
                                                                      dist.counts.end());
        std::sort(by_count.begin(), by_count.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        const std::size_t take = std::min(top_k, by_count.size());
        for (std::size_t i = 0; i < take; ++i) union_ids.push_back(by_count[i].first);
    }
    std::sort(union_ids.begin(), union_ids.end());
    union_ids.erase(std::unique(union_ids.begin(), union_ids.end()), union_ids.end());
    return union_ids;
}

inline TokenDistribution restrict_to_ids(const TokenDistribution& dist,
                                         std::span<const std::uint32_t> ids,
                                         std::string_view subset) {
    TokenDistribution out;
    out.source = dist.source;
    out.subset = subset;
    for (const std::uint32_t id : ids) {
        auto it = dist.counts.find(id);
        if (it != dist.counts.end()) out.add(id, it->second);
    }
    return out;
}

// Restricts a distribution to tokens satisfying a per-token rule. For
// top1000_union use top_frequency_union + restrict_to_ids, which need the
// whole source collection.
inline TokenDistribution apply_subset(const TokenDistribution& dist, SubsetRule rule,
                                      const BpeModel& model) {
    if (rule == SubsetRule::top1000_union) {
        throw std::invalid_argument("apply_subset: top1000_union needs the source collection");
    }
    TokenDistribution out;
    out.source = dist.source;
    out.subset = subset_name(rule);
    if (rule == SubsetRule::all) {
        out.counts = dist.counts;
        out.total = dist.total;
        return out;
    }
    for (const auto& [id, n] : dist.counts) {
        if (token_matches_rule(model, id, rule)) out.add(id, n);
    }
    return out;
}

// D(P||Q) in nats over the union support, with additive smoothing applied to
// the normalized distributions before renormalization. With eps = 0 the
// divergence is infinite whenever P has support outside Q.
inline double kl_divergence(const TokenDistribution& p, const TokenDistribution& q,
                            double eps = 1e-10) {
    if (p.subset != q.subset) {
        throw std::invalid_argument("kl_divergence: distributions use different subsets");
    }
    if (p.total == 0 || q.total == 0) {
        throw std::invalid_argument("kl_divergence: empty support after subsetting");
    }

    std::vector<std::uint32_t> support;
    support.reserve(p.counts.size() + q.counts.size());
    for (const auto& [id, _] : p.counts) support.push_back(id);
    for (const auto& [id, _] : q.counts) support.push_back(id);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());

    const double norm = 1.0 + eps * static_cast<double>(support.size());
    auto prob = [&](const TokenDistribution& d, std::uint32_t id) {
        auto it = d.counts.find(id);
        const double raw =
            it == d.counts.end()
                ? 0.0
                : static_cast<double>(it->second) / static_cast<double>(d.total);
        return (raw + eps) / norm;
    };

    double sum = 0.0;
    for (const std::uint32_t id : support) {
        const double pp = prob(p, id);
        if (pp == 0.0) continue;
        sum += pp * std::log(pp / prob(q, id));
    }
    return sum;
}

struct KlMatrix {
    std::vector<std::string> labels;
    std::vector<double> cells;

    double at(std::size_t i, std::size_t j) const { return cells[i * labels.size() + j]; }

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw CorpusError("cannot write matrix: " + path.string());
        out << "source";
        for (const auto& label : labels) out << ',' << label;
        out << '\n';
        char buf[64];
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out << labels[i];
            for (std::size_t j = 0; j < labels.size(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.10g", at(i, j));
                out << ',' << buf;
            }
            out << '\n';
        }
        if (!out) throw CorpusError("write failed: " + path.string());
    }
};

// M[i][j] = D(P_i || P_j); zero diagonal, not symmetric in general.
inline KlMatrix kl_matrix(std::span<const TokenDistribution> dists, double eps = 1e-10) {
    if (dists.size() < 2) {
        throw std::invalid_argument("kl_matrix: need at least two sources");
    }
    for (const auto& d : dists) {
        if (d.subset != dists.front().subset) {
            throw std::invalid_argument("kl_matrix: mixed subset rules");
        }
    }

    KlMatrix m;
    for (const auto& d : dists) m.labels.push_back(d.source);
    m.cells.assign(dists.size() * dists.size(), 0.0);
    for (std::size_t i = 0; i < dists.size(); ++i) {
        for (std::size_t j = 0; j < dists.size(); ++j) {
            m.cells[i * dists.size() + j] =
                (i == j) ? 0.0 : kl_divergence(dists[i], dists[j], eps);
        }
    }
    return m;
}

} // namespace pforge
