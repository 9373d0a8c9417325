// Porter's suffix-stripping stemmer. Follows the ANSI C reference release
// (which also produced the published vocabulary/output pairs), including its
// two departures from the 1980 article: "bli" -> "ble" and "logi" -> "log"
// in step 2.

#include "qexp/textprep.hpp"

namespace qexp {

namespace {

class PorterStemmer {
public:
    explicit PorterStemmer(std::string_view word) : b_(word), k_(static_cast<int>(word.size()) - 1) {}

    std::string run() {
        if (k_ <= 1) return b_;
        step1ab();
        if (k_ > 0) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        b_.resize(static_cast<std::size_t>(k_ + 1));
        return b_;
    }

private:
    std::string b_;
    int k_;
    int j_ = 0;

    char at(int i) const { return b_[static_cast<std::size_t>(i)]; }

    bool cons(int i) const {
        switch (at(i)) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !cons(i - 1);
            default: return true;
        }
    }

    // Number of VC sequences in b[0..j].
    int measure() const {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j_; ++i) {
            if (!cons(i)) return true;
        }
        return false;
    }

    bool double_cons(int j) const {
        if (j < 1) return false;
        if (at(j) != at(j - 1)) return false;
        return cons(j);
    }

    // consonant-vowel-consonant ending at i, where the last c is not w, x or y
    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        char ch = at(i);
        return ch != 'w' && ch != 'x' && ch != 'y';
    }

    bool ends(std::string_view s) {
        int len = static_cast<int>(s.size());
        if (len > k_ + 1) return false;
        if (std::string_view(b_).substr(static_cast<std::size_t>(k_ + 1 - len), s.size()) != s) return false;
        j_ = k_ - len;
        return true;
    }

    void set_to(std::string_view s) {
        b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
        k_ = j_ + static_cast<int>(s.size());
    }

    void replace_if_measured(std::string_view s) {
        if (measure() > 0) set_to(s);
    }

    void step1ab() {
        if (at(k_) == 's') {
            if (ends("sses")) {
                k_ -= 2;
            } else if (ends("ies")) {
                set_to("i");
            } else if (at(k_ - 1) != 's') {
                --k_;
            }
        }
        if (ends("eed")) {
            if (measure() > 0) --k_;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            if (ends("at")) {
                set_to("ate");
            } else if (ends("bl")) {
                set_to("ble");
            } else if (ends("iz")) {
                set_to("ize");
            } else if (double_cons(k_)) {
                --k_;
                char ch = at(k_);
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
            } else {
                j_ = k_;
                if (measure() == 1 && cvc(k_)) set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
    }

    struct Rule {
        std::string_view suffix;
        std::string_view replacement;
    };

    // First matching suffix wins; the replacement applies only when m() > 0.
    template <std::size_t N>
    void apply_first(const Rule (&rules)[N]) {
        for (const auto& r : rules) {
            if (ends(r.suffix)) {
                replace_if_measured(r.replacement);
                return;
            }
        }
    }

    void step2() {
        switch (at(k_ - 1)) {
            case 'a': {
                static constexpr Rule rules[] = {{"ational", "ate"}, {"tional", "tion"}};
                apply_first(rules);
                break;
            }
            case 'c': {
                static constexpr Rule rules[] = {{"enci", "ence"}, {"anci", "ance"}};
                apply_first(rules);
                break;
            }
            case 'e': {
                static constexpr Rule rules[] = {{"izer", "ize"}};
                apply_first(rules);
                break;
            }
            case 'l': {
                static constexpr Rule rules[] = {
                    {"bli", "ble"}, {"alli", "al"}, {"entli", "ent"}, {"eli", "e"}, {"ousli", "ous"}};
                apply_first(rules);
                break;
            }
            case 'o': {
                static constexpr Rule rules[] = {{"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}};
                apply_first(rules);
                break;
            }
            case 's': {
                static constexpr Rule rules[] = {
                    {"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"}, {"ousness", "ous"}};
                apply_first(rules);
                break;
            }
            case 't': {
                static constexpr Rule rules[] = {{"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}};
                apply_first(rules);
                break;
            }
            case 'g': {
                static constexpr Rule rules[] = {{"logi", "log"}};
                apply_first(rules);
                break;
            }
            default: break;
        }
    }

    void step3() {
        switch (at(k_)) {
            case 'e': {
                static constexpr Rule rules[] = {{"icate", "ic"}, {"ative", ""}, {"alize", "al"}};
                apply_first(rules);
                break;
            }
            case 'i': {
                static constexpr Rule rules[] = {{"iciti", "ic"}};
                apply_first(rules);
                break;
            }
            case 'l': {
                static constexpr Rule rules[] = {{"ical", "ic"}, {"ful", ""}};
                apply_first(rules);
                break;
            }
            case 's': {
                static constexpr Rule rules[] = {{"ness", ""}};
                apply_first(rules);
                break;
            }
            default: break;
        }
    }

    bool ends_any(std::initializer_list<std::string_view> suffixes) {
        for (auto s : suffixes) {
            if (ends(s)) return true;
        }
        return false;
    }

    void step4() {
        bool matched = false;
        switch (at(k_ - 1)) {
            case 'a': matched = ends("al"); break;
            case 'c': matched = ends_any({"ance", "ence"}); break;
            case 'e': matched = ends("er"); break;
            case 'i': matched = ends("ic"); break;
            case 'l': matched = ends_any({"able", "ible"}); break;
            case 'n': matched = ends_any({"ant", "ement", "ment", "ent"}); break;
            case 'o':
                if (ends("ion") && j_ >= 0 && (at(j_) == 's' || at(j_) == 't')) {
                    matched = true;
                } else {
                    matched = ends("ou");
                }
                break;
            case 's': matched = ends("ism"); break;
            case 't': matched = ends_any({"ate", "iti"}); break;
            case 'u': matched = ends("ous"); break;
            case 'v': matched = ends("ive"); break;
            case 'z': matched = ends("ize"); break;
            default: break;
        }
        if (matched && measure() > 1) k_ = j_;
    }

    void step5() {
        j_ = k_;
        if (at(k_) == 'e') {
            int m = measure();
            if (m > 1 || (m == 1 && !cvc(k_ - 1))) --k_;
        }
        if (at(k_) == 'l' && double_cons(k_) && measure() > 1) --k_;
    }
};

}  // namespace

std::string porter_stem(std::string_view word) {
    return PorterStemmer(word).run();
}

}  // namespace qexp
