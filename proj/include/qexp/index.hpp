#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qexp/corpus.hpp"

namespace qexp {

struct Posting {
    std::uint32_t doc = 0;  // dense document number
    std::uint32_t tf = 0;
};

/// Inverted index over document content. Documents with no tokens are not
/// indexed and never ranked.
class InvertedIndex {
public:
    static constexpr int kFormatVersion = 1;

    /// Throws std::invalid_argument for an empty store or a store whose
    /// documents are all empty.
    static InvertedIndex build(const DocumentStore& store);

    std::size_t num_docs() const { return doc_ids_.size(); }
    std::size_t num_terms() const { return terms_.size(); }
    std::uint64_t total_tokens() const { return total_tokens_; }

    const std::string& doc_id(std::uint32_t doc) const { return doc_ids_[doc]; }
    std::uint32_t doc_length(std::uint32_t doc) const { return doc_lengths_[doc]; }
    /// Dense number of an indexed document, or -1.
    std::int64_t doc_number(const std::string& doc_id) const;

    /// 0 for terms that never occur.
    std::uint64_t collection_tf(const std::string& term) const;
    std::span<const Posting> postings(const std::string& term) const;
    std::uint32_t tf(const std::string& term, std::uint32_t doc) const;

    const std::vector<std::string>& terms() const { return terms_; }
    std::int64_t term_id(const std::string& term) const;

    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

    bool operator==(const InvertedIndex& other) const;

private:
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::uint32_t> doc_lookup_;
    std::vector<std::string> terms_;  // sorted
    std::unordered_map<std::string, std::uint32_t> term_lookup_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint64_t> collection_tf_;
    std::uint64_t total_tokens_ = 0;

    void rebuild_lookups();
};

struct ScoringConfig {
    double mu = 50.0;
};

/// A query term with its weight. Weights are 1.0 everywhere in the pipeline.
struct QueryTerm {
    std::string term;
    double weight = 1.0;
};

std::vector<QueryTerm> unweighted(std::span<const std::string> terms);

constexpr double kUnrankable = -std::numeric_limits<double>::infinity();

/// Query likelihood with Dirichlet smoothing, in log space:
///   sum_t w_t * log((tf(t,d) + mu * cf(t) / |C|) / (|d| + mu))
/// Terms absent from the collection are skipped. Returns kUnrankable when no
/// query term occurs in the collection; throws for an unknown doc_id.
double score_lm_dirichlet(std::span<const QueryTerm> terms, const std::string& doc_id,
                          const InvertedIndex& idx, const ScoringConfig& cfg);

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

struct RankedList {
    std::string topic_id;
    std::vector<ScoredDoc> docs;  // score desc, doc_id asc
};

/// Scores every indexed document and keeps the best top_n.
RankedList search(const InvertedIndex& idx, std::span<const QueryTerm> terms,
                  const ScoringConfig& cfg, std::size_t top_n, std::string topic_id = {});

}  // namespace qexp
