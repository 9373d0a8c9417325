#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qexp {

enum class PunctuationPolicy { strip, keep_intraword_hyphen };

struct NormalizationConfig {
    bool lowercase = true;
    bool strip_html = true;
    PunctuationPolicy punctuation = PunctuationPolicy::strip;
};

/// Lowercases, removes HTML tags and entities, replaces punctuation with
/// whitespace and collapses whitespace runs. Bytes >= 0x80 (UTF-8 sequences)
/// are kept as word characters. Idempotent for any config.
std::string normalize_text(std::string_view raw, const NormalizationConfig& cfg = {});

/// Splits on ASCII whitespace; never yields empty tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Original Porter (1980) stemmer, ANSI C reference variant. Expects a
/// lowercase token; words of length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

class StopLists {
public:
    StopLists() = default;
    StopLists(std::set<std::string> stopwords, std::set<std::string> stop_adjectives);

    /// Reads two files in the stoplist format: one token per line, `#` starts
    /// a comment, blank lines ignored. Entries are lowercased; an entry with
    /// inner whitespace is an error.
    static StopLists load(const std::filesystem::path& stopwords,
                          const std::filesystem::path& stop_adjectives);

    bool contains(std::string_view term) const;
    const std::set<std::string, std::less<>>& stopwords() const { return stopwords_; }
    const std::set<std::string, std::less<>>& stop_adjectives() const { return stop_adjectives_; }

private:
    std::set<std::string, std::less<>> stopwords_;
    std::set<std::string, std::less<>> stop_adjectives_;
};

std::set<std::string> read_stoplist(const std::filesystem::path& path);

struct FilteredQuery {
    std::string topic_id;
    std::string user_id;
    std::vector<std::string> terms;
};

/// Drops every token found in either stoplist; order is preserved.
std::vector<std::string> filter_terms(std::span<const std::string> terms, const StopLists& lists);

FilteredQuery filter_query(std::string topic_id, std::string user_id,
                           std::span<const std::string> terms, const StopLists& lists);

}  // namespace qexp
