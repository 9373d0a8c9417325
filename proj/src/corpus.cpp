#include "qexp/corpus.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

using json = nlohmann::json;

namespace qexp {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

// Text fields must be strings when present.
bool read_text(const json& rec, const char* key, std::string& out) {
    if (!rec.contains(key) || rec[key].is_null()) return true;
    if (!rec[key].is_string()) return false;
    out = rec[key].get<std::string>();
    return true;
}

std::optional<Document> parse_document(const json& rec, const NormalizationConfig& norm,
                                       std::string& why) {
    if (!rec.is_object()) {
        why = "record is not an object";
        return std::nullopt;
    }
    if (!rec.contains("doc_id") || !rec["doc_id"].is_string() ||
        rec["doc_id"].get<std::string>().empty()) {
        why = "missing or non-string doc_id";
        return std::nullopt;
    }
    Document doc;
    doc.doc_id = rec["doc_id"].get<std::string>();
    std::string title, author, publisher, content;
    if (!read_text(rec, "title", title) || !read_text(rec, "author", author) ||
        !read_text(rec, "publisher", publisher) || !read_text(rec, "content", content)) {
        why = "text field is not a string";
        return std::nullopt;
    }
    bool has_text = rec.contains("title") || rec.contains("author") || rec.contains("publisher") ||
                    rec.contains("content");
    if (!has_text) {
        why = "record has no text field";
        return std::nullopt;
    }
    doc.title = normalize_text(title, norm);
    doc.author = normalize_text(author, norm);
    doc.publisher = normalize_text(publisher, norm);
    doc.content = normalize_text(content, norm);
    if (rec.contains("year") && !rec["year"].is_null()) {
        if (!rec["year"].is_number_integer()) {
            why = "year is not an integer";
            return std::nullopt;
        }
        doc.year = rec["year"].get<int>();
    }
    if (rec.contains("codes") && !rec["codes"].is_null()) {
        if (!rec["codes"].is_array()) {
            why = "codes is not an array";
            return std::nullopt;
        }
        for (const auto& c : rec["codes"]) {
            if (!c.is_string()) {
                why = "codes entry is not a string";
                return std::nullopt;
            }
            doc.classification_codes.push_back(c.get<std::string>());
        }
    }
    return doc;
}

std::optional<UserProfile> parse_user(const json& rec, std::string& why) {
    if (!rec.is_object() || !rec.contains("user_id") || !rec["user_id"].is_string() ||
        rec["user_id"].get<std::string>().empty()) {
        why = "missing or non-string user_id";
        return std::nullopt;
    }
    UserProfile u;
    u.user_id = rec["user_id"].get<std::string>();
    try {
        if (rec.contains("catalog")) u.catalog = rec["catalog"].get<std::vector<std::string>>();
        if (rec.contains("tags")) {
            for (const auto& t : rec["tags"]) {
                if (!t.is_array() || t.size() != 2) throw std::invalid_argument("bad tag pair");
                u.tags.emplace_back(t[0].get<std::string>(), t[1].get<std::string>());
            }
        }
        if (rec.contains("ratings")) {
            for (const auto& r : rec["ratings"]) {
                if (!r.is_array() || r.size() != 2) throw std::invalid_argument("bad rating pair");
                double v = r[1].get<double>();
                if (v < 0.0 || v > 10.0) throw std::invalid_argument("rating outside [0,10]");
                u.ratings.emplace_back(r[0].get<std::string>(), v);
            }
        }
    } catch (const std::exception& e) {
        why = e.what();
        return std::nullopt;
    }
    return u;
}

template <typename Parse, typename Store>
void read_jsonl(const std::filesystem::path& path, Parse parse, Store& store, IngestReport& report) {
    auto in = open_or_throw(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        json rec = json::parse(line, nullptr, false);
        std::string why;
        if (rec.is_discarded()) {
            why = "invalid JSON";
        } else if (auto item = parse(rec, why)) {
            if (store.add(std::move(*item))) {
                ++report.accepted;
            } else {
                ++report.duplicates;
                report.messages.push_back("line " + std::to_string(line_no) + ": duplicate id");
            }
            continue;
        }
        ++report.malformed;
        report.messages.push_back("line " + std::to_string(line_no) + ": " + why);
    }
}

}  // namespace

bool DocumentStore::add(Document doc) {
    if (by_id_.contains(doc.doc_id)) return false;
    by_id_.emplace(doc.doc_id, docs_.size());
    docs_.push_back(std::move(doc));
    return true;
}

const Document* DocumentStore::find(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

DocumentStore ingest_documents(const std::filesystem::path& path, const NormalizationConfig& norm,
                               IngestReport* report) {
    DocumentStore store;
    IngestReport local;
    read_jsonl(
        path, [&](const json& rec, std::string& why) { return parse_document(rec, norm, why); },
        store, local);
    if (report) *report = std::move(local);
    return store;
}

std::string serialize_store(const DocumentStore& store) {
    std::string out;
    for (const auto& d : store.documents()) {
        json rec = json::object();
        rec["doc_id"] = d.doc_id;
        rec["title"] = d.title;
        rec["author"] = d.author;
        rec["publisher"] = d.publisher;
        rec["year"] = d.year ? json(*d.year) : json(nullptr);
        rec["codes"] = d.classification_codes;
        rec["content"] = d.content;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

bool UserStore::add(UserProfile user) {
    if (by_id_.contains(user.user_id)) return false;
    by_id_.emplace(user.user_id, users_.size());
    users_.push_back(std::move(user));
    return true;
}

const UserProfile* UserStore::find(const std::string& user_id) const {
    auto it = by_id_.find(user_id);
    return it == by_id_.end() ? nullptr : &users_[it->second];
}

UserStore ingest_users(const std::filesystem::path& path, IngestReport* report) {
    UserStore users;
    IngestReport local;
    read_jsonl(path, parse_user, users, local);
    if (report) *report = std::move(local);
    return users;
}

std::string serialize_users(const UserStore& users) {
    std::string out;
    for (const auto& u : users.users()) {
        json rec = json::object();
        rec["user_id"] = u.user_id;
        rec["catalog"] = u.catalog;
        json tags = json::array();
        for (const auto& [doc, tag] : u.tags) tags.push_back({doc, tag});
        rec["tags"] = tags;
        json ratings = json::array();
        for (const auto& [doc, r] : u.ratings) ratings.push_back({doc, r});
        rec["ratings"] = ratings;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

ProfileDocument build_profile_document(const UserProfile& user, const DocumentStore& store) {
    ProfileDocument profile;
    profile.user_id = user.user_id;
    for (const auto& doc_id : user.catalog) {
        const Document* doc = store.find(doc_id);
        if (!doc) {
            ++profile.missing_documents;
            continue;
        }
        if (doc->content.empty()) continue;
        if (!profile.text.empty()) profile.text += ' ';
        profile.text += doc->content;
    }
    profile.word_count = tokenize(profile.text).size();
    return profile;
}

std::vector<Topic> load_topics(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::vector<Topic> topics;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank(line)) continue;
        auto tab1 = line.find('\t');
        auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw ParseError(path.string(), line_no, "expected topic_id<TAB>user_id<TAB>query");
        }
        Topic t;
        t.topic_id = line.substr(0, tab1);
        t.user_id = line.substr(tab1 + 1, tab2 - tab1 - 1);
        t.query_text = line.substr(tab2 + 1);
        if (t.topic_id.empty() || t.user_id.empty()) {
            throw ParseError(path.string(), line_no, "empty topic_id or user_id");
        }
        topics.push_back(std::move(t));
    }
    return topics;
}

std::size_t flag_unresolved_topics(std::vector<Topic>& topics, const UserStore& users) {
    std::size_t flagged = 0;
    for (auto& t : topics) {
        t.user_resolved = users.find(t.user_id) != nullptr;
        if (!t.user_resolved) ++flagged;
    }
    return flagged;
}

void Qrels::set(const std::string& topic_id, const std::string& doc_id, int grade) {
    judgments_[topic_id][doc_id] = grade;
}

int Qrels::grade(const std::string& topic_id, const std::string& doc_id) const {
    auto t = judgments_.find(topic_id);
    if (t == judgments_.end()) return 0;
    auto d = t->second.find(doc_id);
    return d == t->second.end() ? 0 : d->second;
}

std::size_t Qrels::relevant_count(const std::string& topic_id) const {
    auto t = judgments_.find(topic_id);
    if (t == judgments_.end()) return 0;
    std::size_t n = 0;
    for (const auto& [doc, g] : t->second) n += g >= 1 ? 1 : 0;
    return n;
}

std::size_t Qrels::size() const {
    std::size_t n = 0;
    for (const auto& [topic, docs] : judgments_) n += docs.size();
    return n;
}

Qrels load_qrels(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        std::istringstream fields(line);
        std::string topic, iter, doc, grade_text, extra;
        if (!(fields >> topic >> iter >> doc >> grade_text) || (fields >> extra)) {
            throw ParseError(path.string(), line_no, "expected 4 fields: topic iter doc grade");
        }
        int grade = 0;
        auto [ptr, ec] = std::from_chars(grade_text.data(), grade_text.data() + grade_text.size(), grade);
        if (ec != std::errc{} || ptr != grade_text.data() + grade_text.size() || grade < 0) {
            throw ParseError(path.string(), line_no, "grade must be a non-negative integer");
        }
        qrels.set(topic, doc, grade);
    }
    return qrels;
}

}  // namespace qexp
