#include "qexp/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

using json = nlohmann::json;

namespace qexp {

void RunFile::append(const RankedList& ranked) {
    int rank = 0;
    for (const auto& d : ranked.docs) entries.push_back({ranked.topic_id, d.doc_id, ++rank, d.score});
}

std::vector<std::string> RunFile::ranking(const std::string& topic_id) const {
    std::vector<const RunEntry*> rows;
    for (const auto& e : entries) {
        if (e.topic_id == topic_id) rows.push_back(&e);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RunEntry* a, const RunEntry* b) { return a->rank < b->rank; });
    std::vector<std::string> docs;
    docs.reserve(rows.size());
    for (const auto* r : rows) docs.push_back(r->doc_id);
    return docs;
}

std::vector<std::string> RunFile::topics() const {
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (seen.insert(e.topic_id).second) order.push_back(e.topic_id);
    }
    return order;
}

std::string format_run(const RunFile& run) {
    std::string out;
    char score[64];
    for (const auto& e : run.entries) {
        std::snprintf(score, sizeof score, "%.8f", e.score);
        out += e.topic_id + " Q0 " + e.doc_id + ' ' + std::to_string(e.rank) + ' ' + score + ' ' +
               run.run_tag + '\n';
    }
    return out;
}

void write_run(const RunFile& run, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write run: " + path.string());
    os << format_run(run);
}

RunFile read_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run: " + path.string());
    RunFile run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        RunEntry e;
        std::string q0, tag, extra;
        if (!(fields >> e.topic_id >> q0 >> e.doc_id >> e.rank >> e.score >> tag) || (fields >> extra)) {
            throw ParseError(path.string(), line_no, "expected `topic Q0 doc rank score tag`");
        }
        if (e.rank < 1) throw ParseError(path.string(), line_no, "rank must be >= 1");
        if (run.run_tag.empty()) run.run_tag = tag;
        run.entries.push_back(std::move(e));
    }
    return run;
}

double average_precision(std::span<const std::string> ranking, const Qrels& qrels,
                         const std::string& topic_id) {
    const std::size_t total_relevant = qrels.relevant_count(topic_id);
    if (total_relevant == 0) return 0.0;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (qrels.is_relevant(topic_id, ranking[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

double reciprocal_rank(std::span<const std::string> ranking, const Qrels& qrels,
                       const std::string& topic_id) {
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (qrels.is_relevant(topic_id, ranking[i])) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

double precision_at(std::span<const std::string> ranking, const Qrels& qrels,
                    const std::string& topic_id, std::size_t cutoff) {
    if (cutoff == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size() && i < cutoff; ++i) {
        if (qrels.is_relevant(topic_id, ranking[i])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(cutoff);
}

EvalResult evaluate_run(const RunFile& run, const Qrels& qrels) {
    EvalResult result;
    for (const auto& topic : run.topics()) {
        if (qrels.relevant_count(topic) == 0) {
            result.excluded_topics.push_back(topic);
            continue;
        }
        auto ranking = run.ranking(topic);
        result.per_topic[topic] = {average_precision(ranking, qrels, topic),
                                   reciprocal_rank(ranking, qrels, topic),
                                   precision_at(ranking, qrels, topic, 10)};
    }
    if (!result.per_topic.empty()) {
        for (const auto& [topic, m] : result.per_topic) {
            result.map += m.ap;
            result.mrr += m.rr;
            result.p_at_10 += m.p10;
        }
        const double n = static_cast<double>(result.per_topic.size());
        result.map /= n;
        result.mrr /= n;
        result.p_at_10 /= n;
    }
    return result;
}

ExperimentConfig ExperimentConfig::table_row(ConfId id, std::size_t k, double mu, std::size_t top_n) {
    ExperimentConfig cfg;
    cfg.conf_id = id;
    cfg.k = k;
    cfg.mu = mu;
    cfg.top_n = top_n;
    switch (id) {
        case ConfId::Conf1: cfg.filtering = QueryForm::original; cfg.expansion = ExpansionKind::none; break;
        case ConfId::Conf2: cfg.filtering = QueryForm::filtered; cfg.expansion = ExpansionKind::none; break;
        case ConfId::Conf3: cfg.filtering = QueryForm::filtered; cfg.expansion = ExpansionKind::non_personalized; break;
        case ConfId::Conf4: cfg.filtering = QueryForm::filtered; cfg.expansion = ExpansionKind::personalized; break;
        case ConfId::Conf5: cfg.filtering = QueryForm::original; cfg.expansion = ExpansionKind::non_personalized; break;
        case ConfId::Conf6: cfg.filtering = QueryForm::original; cfg.expansion = ExpansionKind::personalized; break;
    }
    return cfg;
}

std::string to_string(ConfId id) {
    return "Conf" + std::to_string(static_cast<int>(id));
}

std::optional<ConfId> parse_conf_id(const std::string& text) {
    for (auto id : kAllConfs) {
        if (to_string(id) == text) return id;
    }
    return std::nullopt;
}

bool is_expanding(ConfId id) {
    return id != ConfId::Conf1 && id != ConfId::Conf2;
}

std::string RunOutcome::audit_jsonl() const {
    std::string out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out += expansion_audit_line(queries[i], expansions[i]);
        out += '\n';
    }
    return out;
}

std::string RunOutcome::skips_jsonl() const {
    std::string out;
    for (const auto& s : skips) {
        out += json{{"topic_id", s.topic_id}, {"reason", s.reason}}.dump();
        out += '\n';
    }
    return out;
}

PreparedQueries prepare_queries(const ExperimentConfig& cfg, std::span<const Topic> topics,
                                const ModelRegistry& models, const StopLists& stoplists,
                                const NormalizationConfig& normalization) {
    PreparedQueries prepared;
    // k = 0 selects nothing from any model, so no model is needed.
    const bool expands = cfg.expansion != ExpansionKind::none && cfg.k > 0;
    for (const auto& topic : topics) {
        if (!topic.user_resolved) {
            prepared.skips.push_back({topic.topic_id, "user profile not found"});
            continue;
        }
        auto tokens = tokenize(normalize_text(topic.query_text, normalization));
        auto form = cfg.filtering == QueryForm::filtered ? filter_terms(tokens, stoplists) : tokens;
        if (form.empty()) {
            prepared.skips.push_back({topic.topic_id, cfg.filtering == QueryForm::filtered
                                                          ? "empty query after filtering"
                                                          : "empty query"});
            continue;
        }
        ExpansionSet es;
        if (expands) {
            auto resolution = models.resolve(cfg.expansion, topic.user_id);
            if (!resolution.model) {
                prepared.skips.push_back({topic.topic_id, resolution.skip_reason});
                continue;
            }
            es = select_embeddings(form, *resolution.model, cfg.k);
        } else {
            for (const auto& t : form) {
                if (!es.row(t)) es.rows.push_back({t, {}});
            }
        }
        prepared.queries.push_back(expand_query(topic.topic_id, form, es));
        prepared.expansions.push_back(std::move(es));
    }
    return prepared;
}

RunOutcome run_configuration(const ExperimentConfig& cfg, std::span<const Topic> topics,
                             const ExperimentInputs& inputs) {
    auto prepared = prepare_queries(cfg, topics, inputs.models, inputs.stoplists, inputs.normalization);
    RunOutcome outcome;
    outcome.run.run_tag = inputs.run_tag;
    outcome.skips = std::move(prepared.skips);
    const ScoringConfig scoring{cfg.mu};
    for (std::size_t i = 0; i < prepared.queries.size(); ++i) {
        auto& q = prepared.queries[i];
        auto ranked = search(inputs.index, unweighted(q.all_terms), scoring, cfg.top_n, q.topic_id);
        if (ranked.docs.empty()) {
            outcome.skips.push_back({q.topic_id, "no query term occurs in the collection"});
            continue;
        }
        outcome.run.append(ranked);
        outcome.queries.push_back(std::move(q));
        outcome.expansions.push_back(std::move(prepared.expansions[i]));
    }
    return outcome;
}

std::vector<SweepRow> sweep_k(std::span<const ConfId> confs, std::size_t k_first, std::size_t k_last,
                              std::span<const Topic> topics, const ExperimentInputs& inputs,
                              const Qrels& qrels, const ExperimentConfig& base,
                              const SweepObserver& observer) {
    if (k_first > k_last) throw std::invalid_argument("empty k range");
    std::vector<SweepRow> rows;
    auto evaluate = [&](ConfId id, std::size_t k) {
        auto cfg = ExperimentConfig::table_row(id, k, base.mu, base.top_n);
        auto outcome = run_configuration(cfg, topics, inputs);
        if (observer) observer(cfg, outcome);
        auto r = evaluate_run(outcome.run, qrels);
        rows.push_back({id, k, r.map, r.mrr, r.p_at_10});
    };
    evaluate(ConfId::Conf1, 0);
    evaluate(ConfId::Conf2, 0);
    for (auto id : confs) {
        if (!is_expanding(id)) continue;
        for (std::size_t k = k_first; k <= k_last; ++k) evaluate(id, k);
    }
    return rows;
}

std::string format_sweep_csv(std::span<const SweepRow> rows) {
    std::string out = "conf,k,map,mrr,p10\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,%.4f\n", to_string(r.conf).c_str(), r.k, r.map,
                      r.mrr, r.p10);
        out += buf;
    }
    return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<SweepRow> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != "conf,k,map,mrr,p10") throw ParseError("sweep csv", 1, "unexpected header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        auto conf = cells.size() == 5 ? parse_conf_id(cells[0]) : std::nullopt;
        if (!conf) throw ParseError("sweep csv", line_no, "expected conf,k,map,mrr,p10");
        try {
            rows.push_back({*conf, std::stoul(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                            std::stod(cells[4])});
        } catch (const std::exception&) {
            throw ParseError("sweep csv", line_no, "non-numeric field");
        }
    }
    return rows;
}

}  // namespace qexp
