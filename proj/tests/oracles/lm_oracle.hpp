#pragma once

// Brute-force query-likelihood scorer over raw token lists. It shares no code
// with the index: counts are recomputed by linear scans for every query.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct RawDoc {
    std::string id;
    std::vector<std::string> tokens;
};

/// Sum over the query list (repeats count again) of
/// log((tf + mu * cf / N) / (|d| + mu)), skipping terms with cf = 0.
inline double lm_score(const std::vector<RawDoc>& docs, const RawDoc& doc,
                       const std::vector<std::string>& query, double mu) {
    double total = 0.0;
    for (const auto& d : docs) total += static_cast<double>(d.tokens.size());
    double score = 0.0;
    bool any = false;
    for (const auto& t : query) {
        double cf = 0.0;
        for (const auto& d : docs) cf += static_cast<double>(std::count(d.tokens.begin(), d.tokens.end(), t));
        if (cf == 0.0) continue;
        any = true;
        double tf = static_cast<double>(std::count(doc.tokens.begin(), doc.tokens.end(), t));
        score += std::log((tf + mu * cf / total) / (static_cast<double>(doc.tokens.size()) + mu));
    }
    return any ? score : -std::numeric_limits<double>::infinity();
}

/// Every non-empty document, score descending then id ascending, truncated.
inline std::vector<std::pair<std::string, double>> lm_rank(const std::vector<RawDoc>& docs,
                                                           const std::vector<std::string>& query,
                                                           double mu, std::size_t top_n) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& d : docs) {
        if (d.tokens.empty()) continue;
        double s = lm_score(docs, d, query, mu);
        if (std::isinf(s)) continue;
        out.emplace_back(d.id, s);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (out.size() > top_n) out.resize(top_n);
    return out;
}

}  // namespace oracle
