#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qexp/corpus.hpp"
#include "qexp/expand.hpp"
#include "qexp/index.hpp"

namespace qexp {

struct RunEntry {
    std::string topic_id;
    std::string doc_id;
    int rank = 0;
    double score = 0.0;
};

struct RunFile {
    std::string run_tag;
    std::vector<RunEntry> entries;  // grouped by topic, ranks 1..n within a topic

    void append(const RankedList& ranked);
    /// Doc ids of one topic in rank order.
    std::vector<std::string> ranking(const std::string& topic_id) const;
    /// Topic ids in first-appearance order.
    std::vector<std::string> topics() const;
};

/// `topic_id Q0 doc_id rank score run_tag`, one line per entry.
std::string format_run(const RunFile& run);
void write_run(const RunFile& run, const std::filesystem::path& path);
/// Throws ParseError on malformed lines.
RunFile read_run(const std::filesystem::path& path);

double average_precision(std::span<const std::string> ranking, const Qrels& qrels,
                         const std::string& topic_id);
double reciprocal_rank(std::span<const std::string> ranking, const Qrels& qrels,
                       const std::string& topic_id);
/// Denominator is always `cutoff`, even if fewer documents were retrieved.
double precision_at(std::span<const std::string> ranking, const Qrels& qrels,
                    const std::string& topic_id, std::size_t cutoff = 10);

struct TopicMetrics {
    double ap = 0.0;
    double rr = 0.0;
    double p10 = 0.0;
};

struct EvalResult {
    double map = 0.0;
    double mrr = 0.0;
    double p_at_10 = 0.0;
    std::map<std::string, TopicMetrics> per_topic;
    /// Run topics that have no relevant judgment (absent from qrels or all grade 0).
    std::vector<std::string> excluded_topics;
};

/// Means over the run's topics that have at least one relevant document.
EvalResult evaluate_run(const RunFile& run, const Qrels& qrels);

enum class QueryForm { original, filtered };

enum class ConfId { Conf1 = 1, Conf2, Conf3, Conf4, Conf5, Conf6 };

struct ExperimentConfig {
    ConfId conf_id = ConfId::Conf1;
    QueryForm filtering = QueryForm::original;
    ExpansionKind expansion = ExpansionKind::none;
    std::size_t k = 0;
    double mu = 50.0;
    std::size_t top_n = 1000;

    /// The table row for `id`, with the given k/mu/top_n.
    static ExperimentConfig table_row(ConfId id, std::size_t k = 0, double mu = 50.0,
                                      std::size_t top_n = 1000);
};

std::string to_string(ConfId id);
std::optional<ConfId> parse_conf_id(const std::string& text);
constexpr std::array<ConfId, 6> kAllConfs{ConfId::Conf1, ConfId::Conf2, ConfId::Conf3,
                                          ConfId::Conf4, ConfId::Conf5, ConfId::Conf6};
bool is_expanding(ConfId id);

struct SkipRecord {
    std::string topic_id;
    std::string reason;
};

struct RunOutcome {
    RunFile run;
    std::vector<SkipRecord> skips;
    std::vector<ExpandedQuery> queries;
    std::vector<ExpansionSet> expansions;  // parallel to queries

    std::string audit_jsonl() const;
    std::string skips_jsonl() const;
};

struct ExperimentInputs {
    const InvertedIndex& index;
    const ModelRegistry& models;
    const StopLists& stoplists;
    NormalizationConfig normalization;
    std::string run_tag = "qexp";
};

struct PreparedQueries {
    std::vector<ExpandedQuery> queries;
    std::vector<ExpansionSet> expansions;  // parallel to queries
    std::vector<SkipRecord> skips;
};

/// Per topic: normalize and tokenize the query, filter it if the config asks,
/// and expand it with the resolved model. Topics with an empty query or no
/// usable model are skipped and recorded. With k = 0 no model is consulted.
PreparedQueries prepare_queries(const ExperimentConfig& cfg, std::span<const Topic> topics,
                                const ModelRegistry& models, const StopLists& stoplists,
                                const NormalizationConfig& normalization);

/// prepare_queries followed by LM-Dirichlet ranking of each query's term set.
RunOutcome run_configuration(const ExperimentConfig& cfg, std::span<const Topic> topics,
                             const ExperimentInputs& inputs);

struct SweepRow {
    ConfId conf;
    std::size_t k = 0;
    double map = 0.0;
    double mrr = 0.0;
    double p10 = 0.0;
};

/// Called with each (config, outcome) produced during a sweep.
using SweepObserver = std::function<void(const ExperimentConfig&, const RunOutcome&)>;

/// Conf1 and Conf2 once each as reference rows (k = 0), then one row per
/// (sweeping conf, k) for k in [k_first, k_last].
std::vector<SweepRow> sweep_k(std::span<const ConfId> confs, std::size_t k_first, std::size_t k_last,
                              std::span<const Topic> topics, const ExperimentInputs& inputs,
                              const Qrels& qrels, const ExperimentConfig& base,
                              const SweepObserver& observer = {});

/// Header `conf,k,map,mrr,p10`, four decimals.
std::string format_sweep_csv(std::span<const SweepRow> rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

}  // namespace qexp
