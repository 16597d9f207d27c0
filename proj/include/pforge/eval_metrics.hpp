#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Risk-of-random-guessing score over per-item benchmark accuracies:
// 1 - mean |s_i - baseline| over the selected items. Near 1 means scores
// cluster at the chance level (0.25 for four-choice benchmarks). The pos
// and neg variants restrict to items strictly above or strictly below the
// baseline; items exactly at the baseline appear only in `all`.

namespace pforge {

class ScoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScoreVector {
    std::vector<std::pair<std::string, double>> items;
    double baseline = 0.25;
};

enum class RrgsVariant { pos, neg, all };

inline double rrgs(const ScoreVector& v, RrgsVariant variant) {
    if (v.items.empty()) throw ScoreError("rrgs: empty score vector");

    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [_, s] : v.items) {
        const bool selected = variant == RrgsVariant::all ||
                              (variant == RrgsVariant::pos && s > v.baseline) ||
                              (variant == RrgsVariant::neg && s < v.baseline);
        if (!selected) continue;
        sum += std::abs(s - v.baseline);
        ++n;
    }
    if (n == 0) throw ScoreError("rrgs: no items selected by variant");
    return 1.0 - sum / static_cast<double>(n);
}

// CSV `item,score` with an optional header row. Scores may be on a [0,1] or
// [0,100] scale; any value above 1 flips the whole file to percentages.
inline ScoreVector load_scores(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScoreError("cannot open scores: " + path.string());

    ScoreVector v;
    std::set<std::string> seen;
    std::string line;
    std::uint64_t line_no = 0;
    double max_score = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ScoreError(path.string() + ":" + std::to_string(line_no) +
                             ": expected `item,score`");
        }
        const std::string item = line.substr(0, comma);
        const std::string field = line.substr(comma + 1);

        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(field, &used);
            while (used < field.size() && (field[used] == ' ' || field[used] == '\t')) ++used;
            if (used != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
            if (line_no == 1) continue; // header row
            throw ScoreError(path.string() + ":" + std::to_string(line_no) +
                             ": non-numeric score \"" + field + "\"");
        }

        if (score < 0.0 || score > 100.0) {
            throw ScoreError(path.string() + ":" + std::to_string(line_no) +
                             ": score outside [0,100]");
        }
        if (!seen.insert(item).second) {
            throw ScoreError(path.string() + ":" + std::to_string(line_no) +
                             ": duplicate item \"" + item + "\"");
        }
        v.items.emplace_back(item, score);
        max_score = std::max(max_score, score);
    }

    if (v.items.empty()) throw ScoreError("no scores in " + path.string());
    if (max_score > 1.0) {
        for (auto& [_, s] : v.items) s /= 100.0;
    }
    return v;
}

} // namespace pforge
