#include "qexp/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

using json = nlohmann::json;

namespace qexp {

InvertedIndex InvertedIndex::build(const DocumentStore& store) {
    if (store.empty()) throw std::invalid_argument("cannot index an empty document store");

    InvertedIndex idx;
    std::map<std::string, std::vector<Posting>> by_term;
    for (const auto& doc : store.documents()) {
        auto tokens = tokenize(doc.content);
        if (tokens.empty()) continue;
        auto number = static_cast<std::uint32_t>(idx.doc_ids_.size());
        idx.doc_ids_.push_back(doc.doc_id);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::map<std::string, std::uint32_t> counts;
        for (auto& t : tokens) ++counts[t];
        for (auto& [term, tf] : counts) by_term[term].push_back({number, tf});
        idx.total_tokens_ += tokens.size();
    }
    if (idx.doc_ids_.empty()) throw std::invalid_argument("every document in the store is empty");

    for (auto& [term, plist] : by_term) {
        std::uint64_t cf = 0;
        for (const auto& p : plist) cf += p.tf;
        idx.terms_.push_back(term);
        idx.postings_.push_back(std::move(plist));
        idx.collection_tf_.push_back(cf);
    }
    idx.rebuild_lookups();
    return idx;
}

void InvertedIndex::rebuild_lookups() {
    doc_lookup_.clear();
    term_lookup_.clear();
    for (std::uint32_t i = 0; i < doc_ids_.size(); ++i) doc_lookup_.emplace(doc_ids_[i], i);
    for (std::uint32_t i = 0; i < terms_.size(); ++i) term_lookup_.emplace(terms_[i], i);
}

std::int64_t InvertedIndex::doc_number(const std::string& doc_id) const {
    auto it = doc_lookup_.find(doc_id);
    return it == doc_lookup_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::int64_t InvertedIndex::term_id(const std::string& term) const {
    auto it = term_lookup_.find(term);
    return it == term_lookup_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::uint64_t InvertedIndex::collection_tf(const std::string& term) const {
    auto id = term_id(term);
    return id < 0 ? 0 : collection_tf_[static_cast<std::size_t>(id)];
}

std::span<const Posting> InvertedIndex::postings(const std::string& term) const {
    auto id = term_id(term);
    if (id < 0) return {};
    return postings_[static_cast<std::size_t>(id)];
}

std::uint32_t InvertedIndex::tf(const std::string& term, std::uint32_t doc) const {
    auto plist = postings(term);
    auto it = std::lower_bound(plist.begin(), plist.end(), doc,
                               [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    return (it != plist.end() && it->doc == doc) ? it->tf : 0;
}

bool InvertedIndex::operator==(const InvertedIndex& other) const {
    if (doc_ids_ != other.doc_ids_ || doc_lengths_ != other.doc_lengths_ || terms_ != other.terms_ ||
        collection_tf_ != other.collection_tf_ || total_tokens_ != other.total_tokens_) {
        return false;
    }
    for (std::size_t t = 0; t < postings_.size(); ++t) {
        const auto& a = postings_[t];
        const auto& b = other.postings_[t];
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].doc != b[i].doc || a[i].tf != b[i].tf) return false;
        }
    }
    return true;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    json docs = json::array();
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) docs.push_back({doc_ids_[i], doc_lengths_[i]});
    json terms = json::array();
    for (std::size_t t = 0; t < terms_.size(); ++t) {
        json plist = json::array();
        for (const auto& p : postings_[t]) plist.push_back({p.doc, p.tf});
        terms.push_back({terms_[t], std::move(plist)});
    }
    json out = {{"format", "qexp-index"},
                {"version", kFormatVersion},
                {"total_tokens", total_tokens_},
                {"docs", std::move(docs)},
                {"terms", std::move(terms)}};
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write index: " + path.string());
    os << out.dump() << '\n';
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open index: " + path.string());
    json data = json::parse(in, nullptr, false);
    if (data.is_discarded() || !data.is_object() || data.value("format", "") != "qexp-index") {
        throw std::runtime_error(path.string() + ": not a qexp index file");
    }
    if (data.value("version", 0) != kFormatVersion) {
        throw std::runtime_error(path.string() + ": unsupported index version");
    }
    InvertedIndex idx;
    std::uint64_t length_sum = 0;
    for (const auto& d : data.at("docs")) {
        idx.doc_ids_.push_back(d.at(0).get<std::string>());
        idx.doc_lengths_.push_back(d.at(1).get<std::uint32_t>());
        length_sum += idx.doc_lengths_.back();
    }
    std::uint64_t cf_sum = 0;
    for (const auto& t : data.at("terms")) {
        idx.terms_.push_back(t.at(0).get<std::string>());
        std::vector<Posting> plist;
        std::uint64_t cf = 0;
        for (const auto& p : t.at(1)) {
            plist.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
            if (plist.back().doc >= idx.doc_ids_.size()) {
                throw std::runtime_error(path.string() + ": posting references unknown document");
            }
            cf += plist.back().tf;
        }
        idx.postings_.push_back(std::move(plist));
        idx.collection_tf_.push_back(cf);
        cf_sum += cf;
    }
    idx.total_tokens_ = data.at("total_tokens").get<std::uint64_t>();
    if (cf_sum != idx.total_tokens_ || length_sum != idx.total_tokens_) {
        throw std::runtime_error(path.string() + ": index token counts are inconsistent");
    }
    idx.rebuild_lookups();
    return idx;
}

std::vector<QueryTerm> unweighted(std::span<const std::string> terms) {
    std::vector<QueryTerm> out;
    out.reserve(terms.size());
    for (const auto& t : terms) out.push_back({t, 1.0});
    return out;
}

double score_lm_dirichlet(std::span<const QueryTerm> terms, const std::string& doc_id,
                          const InvertedIndex& idx, const ScoringConfig& cfg) {
    auto doc = idx.doc_number(doc_id);
    if (doc < 0) throw std::invalid_argument("document not in index: " + doc_id);
    auto number = static_cast<std::uint32_t>(doc);
    const double denom = static_cast<double>(idx.doc_length(number)) + cfg.mu;
    const double total = static_cast<double>(idx.total_tokens());
    double score = 0.0;
    bool any = false;
    for (const auto& qt : terms) {
        auto cf = idx.collection_tf(qt.term);
        if (cf == 0) continue;
        any = true;
        double tf = idx.tf(qt.term, number);
        score += qt.weight * std::log((tf + cfg.mu * static_cast<double>(cf) / total) / denom);
    }
    return any ? score : kUnrankable;
}

RankedList search(const InvertedIndex& idx, std::span<const QueryTerm> terms,
                  const ScoringConfig& cfg, std::size_t top_n, std::string topic_id) {
    if (top_n == 0) throw std::invalid_argument("top_n must be >= 1");
    RankedList ranked{std::move(topic_id), {}};

    // Fold repeated terms; their log contributions add.
    std::map<std::string, double> weights;
    for (const auto& qt : terms) {
        if (idx.collection_tf(qt.term) > 0) weights[qt.term] += qt.weight;
    }
    if (weights.empty()) return ranked;

    // Split each term's contribution into a document-independent part,
    // log(mu * p_c), plus log1p(tf / (mu * p_c)) for documents that contain it.
    // The length normalizer -W * log(|d| + mu) is shared by all terms.
    const double total = static_cast<double>(idx.total_tokens());
    double constant = 0.0;
    double weight_sum = 0.0;
    std::vector<double> matched(idx.num_docs(), 0.0);
    for (const auto& [term, w] : weights) {
        const double smoothed = cfg.mu * static_cast<double>(idx.collection_tf(term)) / total;
        constant += w * std::log(smoothed);
        weight_sum += w;
        for (const auto& p : idx.postings(term)) {
            matched[p.doc] += w * std::log1p(static_cast<double>(p.tf) / smoothed);
        }
    }

    std::vector<ScoredDoc> all;
    all.reserve(idx.num_docs());
    for (std::uint32_t d = 0; d < idx.num_docs(); ++d) {
        double len_norm = weight_sum * std::log(static_cast<double>(idx.doc_length(d)) + cfg.mu);
        all.push_back({idx.doc_id(d), constant + matched[d] - len_norm});
    }
    auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    };
    std::size_t keep = std::min(top_n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
    all.resize(keep);
    ranked.docs = std::move(all);
    return ranked;
}

}  // namespace qexp
