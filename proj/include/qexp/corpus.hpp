#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qexp/textprep.hpp"

namespace qexp {

/// Malformed input with a 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct Document {
    std::string doc_id;
    std::string title;
    std::string author;
    std::string publisher;
    std::optional<int> year;
    std::vector<std::string> classification_codes;
    /// Normalized reviews and description. This is the text that is indexed,
    /// concatenated into profile documents and fed to embedding training.
    std::string content;
};

class DocumentStore {
public:
    /// Returns false (and stores nothing) when doc_id is already present.
    bool add(Document doc);
    const Document* find(const std::string& doc_id) const;
    bool contains(const std::string& doc_id) const { return by_id_.contains(doc_id); }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    /// Documents in ingestion order.
    const std::vector<Document>& documents() const { return docs_; }

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct IngestReport {
    std::size_t accepted = 0;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;
    /// "line N: reason" for each rejected record.
    std::vector<std::string> messages;
};

/// Reads a JSON-lines document file. Missing file throws; malformed records
/// and duplicate doc_ids are skipped and counted. Text fields are normalized
/// with `norm`.
DocumentStore ingest_documents(const std::filesystem::path& path, const NormalizationConfig& norm,
                               IngestReport* report = nullptr);

/// Canonical JSON-lines serialization in ingestion order.
std::string serialize_store(const DocumentStore& store);

struct UserProfile {
    std::string user_id;
    std::vector<std::string> catalog;
    std::vector<std::pair<std::string, std::string>> tags;
    std::vector<std::pair<std::string, double>> ratings;
};

class UserStore {
public:
    bool add(UserProfile user);
    const UserProfile* find(const std::string& user_id) const;
    const std::vector<UserProfile>& users() const { return users_; }
    std::size_t size() const { return users_.size(); }

private:
    std::vector<UserProfile> users_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

UserStore ingest_users(const std::filesystem::path& path, IngestReport* report = nullptr);
std::string serialize_users(const UserStore& users);

struct ProfileDocument {
    std::string user_id;
    std::string text;
    std::size_t word_count = 0;
    /// Catalog entries that were not found in the store and were dropped.
    std::size_t missing_documents = 0;
};

/// The user's catalog documents concatenated in catalog order, single-space
/// joined. Tags and ratings are not included.
ProfileDocument build_profile_document(const UserProfile& user, const DocumentStore& store);

struct Topic {
    std::string topic_id;
    std::string user_id;
    std::string query_text;
    bool user_resolved = true;
};

/// TSV `topic_id<TAB>user_id<TAB>query text`. Blank lines are skipped; any
/// other malformed line throws ParseError.
std::vector<Topic> load_topics(const std::filesystem::path& path);

/// Marks topics whose user_id has no profile. Returns how many were flagged.
std::size_t flag_unresolved_topics(std::vector<Topic>& topics, const UserStore& users);

class Qrels {
public:
    void set(const std::string& topic_id, const std::string& doc_id, int grade);
    /// 0 for unjudged pairs.
    int grade(const std::string& topic_id, const std::string& doc_id) const;
    bool is_relevant(const std::string& topic_id, const std::string& doc_id) const {
        return grade(topic_id, doc_id) >= 1;
    }
    bool has_topic(const std::string& topic_id) const { return judgments_.contains(topic_id); }
    std::size_t relevant_count(const std::string& topic_id) const;
    std::size_t size() const;
    bool empty() const { return judgments_.empty(); }
    const std::map<std::string, std::map<std::string, int>>& judgments() const { return judgments_; }

private:
    std::map<std::string, std::map<std::string, int>> judgments_;
};

/// Whitespace-separated `topic_id iter doc_id grade`; `iter` is ignored.
Qrels load_qrels(const std::filesystem::path& path);

}  // namespace qexp
