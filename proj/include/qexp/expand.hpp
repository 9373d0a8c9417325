#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qexp/embed.hpp"

namespace qexp {

/// Expansion candidates for one query term.
struct ExpansionRow {
    std::string source;
    std::vector<Neighbor> terms;  // similarity desc, ties lexicographic
};

/// One row per distinct source term, in query order.
struct ExpansionSet {
    std::vector<ExpansionRow> rows;
    bool empty() const;
    const ExpansionRow* row(const std::string& source) const;
};

/// Neighbors fetched per term before stem filtering; grown until k survive or
/// the vocabulary is exhausted.
constexpr std::size_t overfetch_count(std::size_t k) { return 3 * k + 10; }

/// For each term: nearest neighbors over the whole vocabulary, minus those
/// sharing the term's Porter stem, truncated to k. OOV terms get empty rows.
ExpansionSet select_embeddings(std::span<const std::string> terms, const EmbeddingModel& model,
                               std::size_t k);

struct TermOrigin {
    std::string term;
    bool original = true;
    std::string source;      // expansion only
    double similarity = 0.0; // expansion only
};

struct ExpandedQuery {
    std::string topic_id;
    std::vector<std::string> original_terms;
    std::vector<std::string> expansion_terms;
    /// Set union of originals and expansions: originals first in query
    /// order, then expansions by source order and similarity.
    std::vector<std::string> all_terms;
    std::vector<TermOrigin> provenance;  // parallel to all_terms
};

ExpandedQuery expand_query(std::string topic_id, std::span<const std::string> terms,
                           const ExpansionSet& es);

enum class ExpansionKind { none, non_personalized, personalized };

std::string to_string(ExpansionKind kind);
std::optional<ExpansionKind> parse_expansion_kind(const std::string& text);

/// Trained models available to an experiment.
class ModelRegistry {
public:
    void set_global(std::shared_ptr<const EmbeddingModel> model) { global_ = std::move(model); }
    void set_user(const std::string& user_id, std::shared_ptr<const EmbeddingModel> model);
    /// Record that a user model could not be trained.
    void set_user_failure(const std::string& user_id, std::string reason);

    const EmbeddingModel* global() const { return global_.get(); }
    const EmbeddingModel* user(const std::string& user_id) const;

    /// Whether undertrained personalized models are refused.
    bool refuse_undertrained = true;

    struct Resolution {
        const EmbeddingModel* model = nullptr;
        std::string skip_reason;  // non-empty when the topic must be skipped
    };

    /// Global model for non_personalized, the user's model for personalized.
    /// Never falls back from a missing user model to the global one.
    Resolution resolve(ExpansionKind kind, const std::string& user_id) const;

private:
    std::shared_ptr<const EmbeddingModel> global_;
    std::map<std::string, std::shared_ptr<const EmbeddingModel>> users_;
    std::map<std::string, std::string> failures_;
};

/// JSON object for the expansion audit file: topic_id, terms with provenance
/// and the per-source expansion rows.
std::string expansion_audit_line(const ExpandedQuery& q, const ExpansionSet& es);

}  // namespace qexp
