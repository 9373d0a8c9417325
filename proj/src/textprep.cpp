#include "qexp/textprep.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <stdexcept>

namespace qexp {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_word_char(char c) {
    return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
}

bool starts_tag(std::string_view s, std::size_t i) {
    if (s[i] != '<' || i + 1 >= s.size()) return false;
    char n = s[i + 1];
    return (n >= 'a' && n <= 'z') || (n >= 'A' && n <= 'Z') || n == '/' || n == '!' || n == '?';
}

// Tags become a single space. An unclosed tag swallows the rest of the input.
std::string strip_tags(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (starts_tag(s, i)) {
            auto close = s.find('>', i);
            out.push_back(' ');
            if (close == std::string_view::npos) break;
            i = close + 1;
            continue;
        }
        out.push_back(s[i++]);
    }
    return out;
}

struct Entity {
    std::string_view name;
    char replacement;
};

constexpr std::array<Entity, 6> kEntities{{
    {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}, {"&nbsp;", ' '},
}};

// Named entities map to their character; numeric and unknown ones to a space.
std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        bool matched = false;
        for (const auto& e : kEntities) {
            if (s.substr(i, e.name.size()) == e.name) {
                out.push_back(e.replacement);
                i += e.name.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        auto semi = s.find(';', i);
        if (semi != std::string_view::npos && semi - i <= 8 && semi > i + 1) {
            auto body = s.substr(i + 1, semi - i - 1);
            bool plausible = std::all_of(body.begin(), body.end(),
                                         [](char c) { return is_ascii_alnum(c) || c == '#'; });
            if (plausible) {
                out.push_back(' ');
                i = semi + 1;
                continue;
            }
        }
        out.push_back(s[i++]);
    }
    return out;
}

}  // namespace

std::string normalize_text(std::string_view raw, const NormalizationConfig& cfg) {
    std::string text(raw);
    if (cfg.strip_html) text = decode_entities(strip_tags(text));

    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool keep = is_word_char(c);
        if (!keep && c == '-' && cfg.punctuation == PunctuationPolicy::keep_intraword_hyphen) {
            keep = i > 0 && i + 1 < text.size() && is_word_char(text[i - 1]) &&
                   is_word_char(text[i + 1]);
        }
        if (!keep) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        if (cfg.lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

std::set<std::string> read_stoplist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stoplist: " + path.string());
    std::set<std::string> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        if (tokens.size() > 1) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": stoplist entry must be a single token");
        }
        auto& t = tokens.front();
        std::transform(t.begin(), t.end(), t.begin(), [](char c) {
            return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        });
        entries.insert(std::move(t));
    }
    return entries;
}

StopLists::StopLists(std::set<std::string> stopwords, std::set<std::string> stop_adjectives)
    : stopwords_(stopwords.begin(), stopwords.end()),
      stop_adjectives_(stop_adjectives.begin(), stop_adjectives.end()) {}

StopLists StopLists::load(const std::filesystem::path& stopwords,
                          const std::filesystem::path& stop_adjectives) {
    return StopLists(read_stoplist(stopwords), read_stoplist(stop_adjectives));
}

bool StopLists::contains(std::string_view term) const {
    return stopwords_.contains(term) || stop_adjectives_.contains(term);
}

std::vector<std::string> filter_terms(std::span<const std::string> terms, const StopLists& lists) {
    std::vector<std::string> kept;
    for (const auto& t : terms) {
        if (!lists.contains(t)) kept.push_back(t);
    }
    return kept;
}

FilteredQuery filter_query(std::string topic_id, std::string user_id,
                           std::span<const std::string> terms, const StopLists& lists) {
    return FilteredQuery{std::move(topic_id), std::move(user_id), filter_terms(terms, lists)};
}

}  // namespace qexp
