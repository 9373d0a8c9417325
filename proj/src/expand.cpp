#include "qexp/expand.hpp"

#include <set>

#include <json.hpp>

using json = nlohmann::json;

namespace qexp {

bool ExpansionSet::empty() const {
    for (const auto& r : rows) {
        if (!r.terms.empty()) return false;
    }
    return true;
}

const ExpansionRow* ExpansionSet::row(const std::string& source) const {
    for (const auto& r : rows) {
        if (r.source == source) return &r;
    }
    return nullptr;
}

ExpansionSet select_embeddings(std::span<const std::string> terms, const EmbeddingModel& model,
                               std::size_t k) {
    ExpansionSet es;
    std::set<std::string> seen;
    for (const auto& t : terms) {
        if (!seen.insert(t).second) continue;
        ExpansionRow row{t, {}};
        if (k > 0 && model.find(t)) {
            const std::string stem = porter_stem(t);
            const std::size_t available = model.vocab_size() - 1;
            std::size_t fetch = overfetch_count(k);
            while (true) {
                auto candidates = nearest_neighbors(model, t, fetch);
                row.terms.clear();
                for (auto& c : candidates) {
                    if (porter_stem(c.term) == stem) continue;
                    row.terms.push_back(std::move(c));
                    if (row.terms.size() == k) break;
                }
                if (row.terms.size() == k || fetch >= available) break;
                fetch *= 2;
            }
        }
        es.rows.push_back(std::move(row));
    }
    return es;
}

ExpandedQuery expand_query(std::string topic_id, std::span<const std::string> terms,
                           const ExpansionSet& es) {
    ExpandedQuery q;
    q.topic_id = std::move(topic_id);
    q.original_terms.assign(terms.begin(), terms.end());
    std::set<std::string> present;
    for (const auto& t : terms) {
        if (!present.insert(t).second) continue;
        q.all_terms.push_back(t);
        q.provenance.push_back({t, true, {}, 0.0});
    }
    for (const auto& row : es.rows) {
        for (const auto& n : row.terms) {
            if (!present.insert(n.term).second) continue;
            q.expansion_terms.push_back(n.term);
            q.all_terms.push_back(n.term);
            q.provenance.push_back({n.term, false, row.source, n.similarity});
        }
    }
    return q;
}

std::string to_string(ExpansionKind kind) {
    switch (kind) {
        case ExpansionKind::none: return "none";
        case ExpansionKind::non_personalized: return "non_personalized";
        case ExpansionKind::personalized: return "personalized";
    }
    return "none";
}

std::optional<ExpansionKind> parse_expansion_kind(const std::string& text) {
    if (text == "none") return ExpansionKind::none;
    if (text == "non_personalized") return ExpansionKind::non_personalized;
    if (text == "personalized") return ExpansionKind::personalized;
    return std::nullopt;
}

void ModelRegistry::set_user(const std::string& user_id, std::shared_ptr<const EmbeddingModel> model) {
    failures_.erase(user_id);
    users_[user_id] = std::move(model);
}

void ModelRegistry::set_user_failure(const std::string& user_id, std::string reason) {
    users_.erase(user_id);
    failures_[user_id] = std::move(reason);
}

const EmbeddingModel* ModelRegistry::user(const std::string& user_id) const {
    auto it = users_.find(user_id);
    return it == users_.end() ? nullptr : it->second.get();
}

ModelRegistry::Resolution ModelRegistry::resolve(ExpansionKind kind, const std::string& user_id) const {
    switch (kind) {
        case ExpansionKind::none:
            return {};
        case ExpansionKind::non_personalized:
            if (!global_) return {nullptr, "global model missing"};
            return {global_.get(), {}};
        case ExpansionKind::personalized: {
            if (auto f = failures_.find(user_id); f != failures_.end()) {
                return {nullptr, "user model failed: " + f->second};
            }
            const EmbeddingModel* m = user(user_id);
            if (!m) return {nullptr, "user model missing"};
            if (refuse_undertrained && m->undertrained()) return {nullptr, "user model undertrained"};
            return {m, {}};
        }
    }
    return {};
}

std::string expansion_audit_line(const ExpandedQuery& q, const ExpansionSet& es) {
    json terms = json::array();
    for (const auto& p : q.provenance) {
        if (p.original) {
            terms.push_back({{"term", p.term}, {"origin", "original"}});
        } else {
            terms.push_back({{"term", p.term},
                             {"origin", "expansion"},
                             {"source", p.source},
                             {"similarity", p.similarity}});
        }
    }
    json rows = json::array();
    for (const auto& r : es.rows) {
        json nbrs = json::array();
        for (const auto& n : r.terms) nbrs.push_back({{"term", n.term}, {"similarity", n.similarity}});
        rows.push_back({{"source", r.source}, {"neighbors", std::move(nbrs)}});
    }
    json out = {{"topic_id", q.topic_id}, {"terms", std::move(terms)}, {"rows", std::move(rows)}};
    return out.dump();
}

}  // namespace qexp
