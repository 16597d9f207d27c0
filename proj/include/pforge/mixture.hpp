#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pforge/hash.hpp"

// Domain-weight configurations and deterministic sampling plans. A config
// assigns token proportions to sources under a total budget; the plan
// apportions the budget exactly across sources (largest remainder), derives
// per-source epoch counts, and materializes a seeded, proportionally
// interleaved document order.

namespace pforge {

class MixtureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MixtureConfig {
    std::string name;
    // Listed order is meaningful: apportionment and interleaving ties break
    // toward earlier sources.
    std::vector<std::pair<std::string, double>> proportions;
    std::uint64_t budget_tokens = 0;
    std::uint64_t seed = 0;

    // Published tables carry one-decimal rounding, so proportion sums may be
    // off by a permille; anything worse is a config bug.
    void validate(double tol = 2e-3) const {
        if (budget_tokens == 0) throw MixtureError("mixture: budget must be positive");
        if (proportions.empty()) throw MixtureError("mixture: no sources configured");
        double sum = 0.0;
        for (const auto& [source, p] : proportions) {
            if (p <= 0.0 || p > 1.0) {
                throw MixtureError("mixture: proportion out of range for " + source);
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) {
            throw MixtureError("mixture: proportions sum to " + std::to_string(sum));
        }
    }

    void save(const std::filesystem::path& path) const {
        nlohmann::json j;
        j["name"] = name;
        j["budget_tokens"] = budget_tokens;
        j["seed"] = seed;
        nlohmann::json props = nlohmann::json::object();
        for (const auto& [source, p] : proportions) props[source] = p;
        j["proportions"] = std::move(props);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw MixtureError("cannot write config: " + path.string());
        out << j.dump(2) << '\n';
    }

    static MixtureConfig load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MixtureError("cannot open config: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw MixtureError("invalid config json: " + std::string(e.what()));
        }
        MixtureConfig cfg;
        try {
            cfg.name = j.at("name").get<std::string>();
            cfg.budget_tokens = j.at("budget_tokens").get<std::uint64_t>();
            if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
            for (const auto& [source, p] : j.at("proportions").items()) {
                const double v = p.get<double>();
                if (v > 0.0) cfg.proportions.emplace_back(source, v);
            }
        } catch (const nlohmann::json::exception& e) {
            throw MixtureError("invalid config " + path.string() + ": " + e.what());
        }
        cfg.validate();
        return cfg;
    }

    static MixtureConfig builtin(std::string_view name);
    static std::vector<std::string> builtin_names();
};

inline MixtureConfig MixtureConfig::builtin(std::string_view name) {
    using P = std::vector<std::pair<std::string, double>>;
    static const std::uint64_t kDcBudget = 330'000'000'000ULL;
    static const std::uint64_t kLbsBudget = 1'340'000'000'000ULL;

    MixtureConfig cfg;
    cfg.name = std::string(name);
    cfg.budget_tokens = kDcBudget;

    if (name == "DC-1") {
        cfg.proportions = P{{"Commoncrawl", 1.0}};
    } else if (name == "DC-2") {
        cfg.proportions = P{{"Commoncrawl", 0.909}, {"GitHub", 0.091}};
    } else if (name == "DC-3") {
        cfg.proportions = P{{"Commoncrawl", 0.758}, {"GitHub", 0.242}};
    } else if (name == "DC-4") {
        cfg.proportions = P{{"Commoncrawl", 0.758}, {"Wikipedia", 0.242}};
    } else if (name == "DC-5") {
        // Published one-decimal percentages; they sum to 100.1%.
        cfg.proportions = P{{"Commoncrawl", 0.758},
                            {"GitHub", 0.091},
                            {"Books", 0.079},
                            {"Wikipedia", 0.073}};
    } else if (name == "DC-6") {
        cfg.proportions = P{{"Commoncrawl", 0.522}, {"C4", 0.267},
                            {"GitHub", 0.052},      {"Books", 0.042},
                            {"ArXiv", 0.046},       {"Wikipedia", 0.038},
                            {"StackExchange", 0.033}};
    } else if (name == "DC-7") {
        cfg.proportions = P{{"RefinedWeb", 1.0}};
    } else if (name == "LBS") {
        cfg.budget_tokens = kLbsBudget;
        cfg.proportions = P{{"Slimpj.Arxiv", 0.04},   {"Slimpj.StackExchanges", 0.032},
                            {"Slimpj.Github", 0.049}, {"Slimpj.Wikipedia", 0.075},
                            {"Slimpj.Books", 0.043},  {"Slimpj.C4", 0.176},
                            {"S2orc", 0.03},          {"Markdown", 0.03},
                            {"Slimpj.CC", 0.345},     {"Redpaj.CC", 0.18}};
    } else {
        throw MixtureError("unknown builtin mixture: " + std::string(name));
    }
    cfg.validate();
    return cfg;
}

inline std::vector<std::string> MixtureConfig::builtin_names() {
    return {"DC-1", "DC-2", "DC-3", "DC-4", "DC-5", "DC-6", "DC-7", "LBS"};
}

struct SourcePlan {
    std::string source;
    std::uint64_t target_tokens = 0;
    std::uint64_t available_tokens = 0;

    double epochs() const {
        return available_tokens == 0
                   ? 0.0
                   : static_cast<double>(target_tokens) / static_cast<double>(available_tokens);
    }
};

struct MixturePlan {
    std::string config_name;
    std::uint64_t budget_tokens = 0;
    std::uint64_t seed = 0;
    std::vector<SourcePlan> sources;

    void save_json(const std::filesystem::path& path) const {
        nlohmann::json j;
        j["name"] = config_name;
        j["budget_tokens"] = budget_tokens;
        j["seed"] = seed;
        nlohmann::json src = nlohmann::json::object();
        for (const auto& s : sources) {
            src[s.source] = {{"target_tokens", s.target_tokens},
                             {"available_tokens", s.available_tokens},
                             {"epochs", s.epochs()}};
        }
        j["sources"] = std::move(src);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw MixtureError("cannot write plan: " + path.string());
        out << j.dump(2) << '\n';
    }
};

// Apportions the budget across sources so targets sum exactly to the budget:
// floor the normalized quotas, then hand the remainder out by largest
// fractional part (ties toward earlier sources).
inline MixturePlan build_plan(const MixtureConfig& config,
                              const std::map<std::string, std::uint64_t>& inventories,
                              std::uint64_t seed) {
    config.validate();

    double weight_sum = 0.0;
    for (const auto& [_, p] : config.proportions) weight_sum += p;

    MixturePlan plan;
    plan.config_name = config.name;
    plan.budget_tokens = config.budget_tokens;
    plan.seed = seed;

    std::vector<double> fractions(config.proportions.size());
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < config.proportions.size(); ++i) {
        const auto& [source, p] = config.proportions[i];
        auto it = inventories.find(source);
        if (it == inventories.end()) {
            throw MixtureError("mixture: no inventory for source " + source);
        }
        if (it->second == 0) {
            throw MixtureError("mixture: empty inventory for source " + source);
        }
        const double quota = static_cast<double>(config.budget_tokens) * (p / weight_sum);
        const auto base = static_cast<std::uint64_t>(quota);
        fractions[i] = quota - static_cast<double>(base);
        plan.sources.push_back(SourcePlan{source, base, it->second});
        assigned += base;
    }

    std::vector<std::size_t> order(plan.sources.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fractions[a] > fractions[b]; });
    for (std::size_t i = 0; assigned < config.budget_tokens; ++i) {
        plan.sources[order[i % order.size()]].target_tokens += 1;
        ++assigned;
    }
    return plan;
}

struct DocEntry {
    std::uint64_t doc_id = 0;
    std::uint64_t tokens = 0;
};

// Emits the training order: per source a seeded shuffle cycled for epochs > 1
// and truncated at the token target, interleaved so every prefix tracks the
// configured proportions to within one document per source.
inline std::vector<std::uint64_t> materialize(
    const MixturePlan& plan, const std::map<std::string, std::vector<DocEntry>>& docs_by_source) {
    struct SourceState {
        const SourcePlan* plan = nullptr;
        std::vector<std::uint32_t> perm;
        const std::vector<DocEntry>* docs = nullptr;
        std::uint64_t emitted_tokens = 0;
        std::size_t cursor = 0;
        bool open = true;
    };

    std::vector<SourceState> states;
    for (const auto& sp : plan.sources) {
        auto it = docs_by_source.find(sp.source);
        if (it == docs_by_source.end() || it->second.empty()) {
            throw MixtureError("materialize: no documents for source " + sp.source);
        }
        SourceState st;
        st.plan = &sp;
        st.docs = &it->second;
        st.perm.resize(it->second.size());
        std::iota(st.perm.begin(), st.perm.end(), 0);

        // Fisher-Yates with a per-source splitmix stream.
        Splitmix64 rng(plan.seed ^ hash64(sp.source, 0x6d6978ULL));
        for (std::size_t i = st.perm.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next() % i);
            std::swap(st.perm[i - 1], st.perm[j]);
        }
        st.open = !st.perm.empty() && sp.target_tokens > 0;
        states.push_back(std::move(st));
    }

    auto next_tokens = [](const SourceState& st) {
        const std::uint32_t idx = st.perm[st.cursor % st.perm.size()];
        return (*st.docs)[idx].tokens;
    };

    std::vector<std::uint64_t> order;
    for (;;) {
        // Pick the open source that is furthest behind its share; compare
        // emitted/target fractions by cross-multiplication to stay exact.
        std::size_t pick = states.size();
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (!states[i].open) continue;
            if (pick == states.size()) {
                pick = i;
                continue;
            }
            const auto& a = states[i];
            const auto& b = states[pick];
            const auto lhs = static_cast<unsigned __int128>(a.emitted_tokens) *
                             b.plan->target_tokens;
            const auto rhs = static_cast<unsigned __int128>(b.emitted_tokens) *
                             a.plan->target_tokens;
            if (lhs < rhs) pick = i;
        }
        if (pick == states.size()) break;

        SourceState& st = states[pick];
        const std::uint64_t tokens = next_tokens(st);
        if (tokens == 0) {
            throw MixtureError("materialize: document with missing token count in source " +
                               st.plan->source);
        }
        if (st.emitted_tokens + tokens > st.plan->target_tokens) {
            st.open = false;
            continue;
        }
        const std::uint32_t idx = st.perm[st.cursor % st.perm.size()];
        order.push_back((*st.docs)[idx].doc_id);
        st.emitted_tokens += tokens;
        ++st.cursor;
    }
    return order;
}

inline void save_order(std::span<const std::uint64_t> order, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MixtureError("cannot write order file: " + path.string());
    const char magic[8] = {'P', 'J', 'F', 'O', 'R', 'D', '1', '\0'};
    out.write(magic, sizeof(magic));
    auto put_u64 = [&out](std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
        out.write(b, 8);
    };
    put_u64(order.size());
    for (const std::uint64_t id : order) put_u64(id);
    if (!out) throw MixtureError("write failed: " + path.string());
}

} // namespace pforge
