#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pforge/unicode.hpp"

// Sharded corpus I/O. Shards are line-delimited JSON with a required `text`
// field, an optional `meta.source` (default "unknown") and an optional `id`.
// Records without an explicit id get doc_id = (shard_index << 40) | line,
// which is injective for < 2^24 shards and < 2^40 lines per shard.

namespace pforge {

struct Document {
    std::uint64_t doc_id = 0;
    std::string source;
    std::string text;
    std::uint64_t byte_len = 0;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Record that failed to parse; carries the 1-based line number.
class MalformedRecordError : public CorpusError {
public:
    MalformedRecordError(const std::filesystem::path& path, std::uint64_t line,
                         const std::string& why)
        : CorpusError(path.string() + ":" + std::to_string(line) +
                      ": malformed record: " + why),
          line_(line) {}

    std::uint64_t line() const noexcept { return line_; }

private:
    std::uint64_t line_;
};

class InvalidUtf8Error : public CorpusError {
public:
    InvalidUtf8Error(const std::filesystem::path& path, std::uint64_t line,
                     std::size_t byte_offset)
        : CorpusError(path.string() + ":" + std::to_string(line) +
                      ": invalid UTF-8 at byte offset " + std::to_string(byte_offset)),
          line_(line),
          byte_offset_(byte_offset) {}

    std::uint64_t line() const noexcept { return line_; }
    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::uint64_t line_;
    std::size_t byte_offset_;
};

struct SourceStats {
    std::uint64_t documents = 0;
    std::uint64_t bytes = 0;

    friend bool operator==(const SourceStats&, const SourceStats&) = default;
};

struct CorpusManifest {
    int version = 1;
    std::vector<std::filesystem::path> shards;
    std::map<std::string, SourceStats> sources;

    std::uint64_t total_documents() const {
        std::uint64_t n = 0;
        for (const auto& [_, s] : sources) n += s.documents;
        return n;
    }

    std::uint64_t total_bytes() const {
        std::uint64_t n = 0;
        for (const auto& [_, s] : sources) n += s.bytes;
        return n;
    }

    void save(const std::filesystem::path& path) const {
        nlohmann::json j;
        j["version"] = version;
        auto shard_list = nlohmann::json::array();
        for (const auto& p : shards) shard_list.push_back(p.string());
        j["shards"] = std::move(shard_list);
        nlohmann::json src = nlohmann::json::object();
        for (const auto& [name, s] : sources) {
            src[name] = {{"documents", s.documents}, {"bytes", s.bytes}};
        }
        j["sources"] = std::move(src);
        j["total_documents"] = total_documents();
        j["total_bytes"] = total_bytes();

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw CorpusError("cannot write manifest: " + path.string());
        out << j.dump(2) << '\n';
    }

    // Shard paths are stored as written; relative paths resolve against the
    // manifest's own directory.
    static CorpusManifest load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw CorpusError("cannot open manifest: " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError("invalid manifest " + path.string() + ": " + e.what());
        }

        CorpusManifest m;
        try {
            m.version = j.at("version").get<int>();
            const auto base = path.parent_path();
            for (const auto& s : j.at("shards")) {
                std::filesystem::path p = s.get<std::string>();
                m.shards.push_back(p.is_absolute() ? p : base / p);
            }
            if (j.contains("sources")) {
                for (const auto& [name, v] : j.at("sources").items()) {
                    m.sources[name] = SourceStats{v.at("documents").get<std::uint64_t>(),
                                                  v.at("bytes").get<std::uint64_t>()};
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError("invalid manifest " + path.string() + ": " + e.what());
        }
        return m;
    }
};

inline std::uint64_t derived_doc_id(std::uint32_t shard_index, std::uint64_t line) {
    return (static_cast<std::uint64_t>(shard_index) << 40) | line;
}

// Streams documents out of one shard in file order. Single consumer.
class ShardReader {
public:
    explicit ShardReader(std::filesystem::path path, std::uint32_t shard_index = 0)
        : path_(std::move(path)), shard_index_(shard_index), in_(path_, std::ios::binary) {
        if (!in_) throw CorpusError("cannot open shard: " + path_.string());
    }

    // Returns the next document, or nullopt at end of file.
    std::optional<Document> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            return parse_line(line);
        }
        return std::nullopt;
    }

    std::uint64_t line_number() const noexcept { return line_no_; }
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    Document parse_line(std::string_view line) const {
        if (auto bad = uni::find_invalid_utf8(line); bad != std::string_view::npos) {
            throw InvalidUtf8Error(path_, line_no_, bad);
        }

        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw MalformedRecordError(path_, line_no_, "not a JSON object");
        }

        auto text_it = j.find("text");
        if (text_it == j.end() || !text_it->is_string()) {
            throw MalformedRecordError(path_, line_no_, "missing or non-string \"text\"");
        }

        Document doc;
        doc.text = text_it->get<std::string>();
        doc.byte_len = doc.text.size();
        doc.source = "unknown";
        if (auto meta = j.find("meta"); meta != j.end()) {
            if (!meta->is_object()) {
                throw MalformedRecordError(path_, line_no_, "\"meta\" is not an object");
            }
            if (auto src = meta->find("source"); src != meta->end()) {
                if (!src->is_string()) {
                    throw MalformedRecordError(path_, line_no_, "\"meta.source\" is not a string");
                }
                doc.source = src->get<std::string>();
            }
        }
        if (auto id = j.find("id"); id != j.end()) {
            if (!id->is_number_unsigned()) {
                throw MalformedRecordError(path_, line_no_, "\"id\" is not an unsigned integer");
            }
            doc.doc_id = id->get<std::uint64_t>();
        } else {
            doc.doc_id = derived_doc_id(shard_index_, line_no_);
        }
        return doc;
    }

    std::filesystem::path path_;
    std::uint32_t shard_index_;
    std::ifstream in_;
    std::uint64_t line_no_ = 0;
};

// Writes documents as line-delimited JSON, one record per call. Output is
// byte-deterministic for identical documents.
class ShardWriter {
public:
    explicit ShardWriter(std::filesystem::path path)
        : path_(std::move(path)), out_(path_, std::ios::binary | std::ios::trunc) {
        if (!out_) throw CorpusError("cannot create shard: " + path_.string());
    }

    void write(const Document& doc) {
        nlohmann::json j;
        j["id"] = doc.doc_id;
        j["meta"] = {{"source", doc.source}};
        j["text"] = doc.text;
        out_ << j.dump() << '\n';
        if (!out_) throw CorpusError("write failed: " + path_.string());
        stats_[doc.source].documents += 1;
        stats_[doc.source].bytes += doc.byte_len;
        ++count_;
    }

    void close() {
        out_.flush();
        if (!out_) throw CorpusError("flush failed: " + path_.string());
        out_.close();
    }

    const std::map<std::string, SourceStats>& source_stats() const noexcept { return stats_; }
    std::uint64_t documents_written() const noexcept { return count_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::map<std::string, SourceStats> stats_;
    std::uint64_t count_ = 0;
};

// Scans shards and produces a manifest with per-source tallies.
inline CorpusManifest build_manifest(std::vector<std::filesystem::path> shard_paths) {
    CorpusManifest m;
    m.shards = std::move(shard_paths);
    for (std::uint32_t i = 0; i < m.shards.size(); ++i) {
        ShardReader reader(m.shards[i], i);
        while (auto doc = reader.next()) {
            auto& s = m.sources[doc->source];
            s.documents += 1;
            s.bytes += doc->byte_len;
        }
    }
    return m;
}

// Tabular report with percentage cells formatted at two decimals.
struct CsvReport {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", fraction * 100.0);
    return buf;
}

namespace detail {

inline void append_csv_field(std::string& out, std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

} // namespace detail

inline std::string to_csv(const CsvReport& report) {
    std::string out;
    auto emit_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out.push_back(',');
            detail::append_csv_field(out, row[i]);
        }
        out.push_back('\n');
    };
    emit_row(report.header);
    for (const auto& row : report.rows) emit_row(row);
    return out;
}

inline void write_report(const CsvReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("cannot write report: " + path.string());
    out << to_csv(report);
    if (!out) throw CorpusError("write failed: " + path.string());
}

} // namespace pforge
