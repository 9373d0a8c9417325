#include "qexp/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qexp/corpus.hpp"
#include "qexp/expand.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

#ifndef QEXP_DATA_DIR
#define QEXP_DATA_DIR "data"
#endif

namespace qexp {

namespace {

TrainingConfig read_training(const Config& cfg, const std::string& section, TrainingConfig t) {
    auto key = [&](const char* name) { return section + "." + name; };
    t.dim = static_cast<int>(cfg.get_int(key("dim"), t.dim));
    t.window = static_cast<int>(cfg.get_int(key("window"), t.window));
    t.negative = static_cast<int>(cfg.get_int(key("negative"), t.negative));
    t.epochs = static_cast<int>(cfg.get_int(key("epochs"), t.epochs));
    t.initial_lr = cfg.get_double(key("initial_lr"), t.initial_lr);
    t.min_count = static_cast<int>(cfg.get_int(key("min_count"), t.min_count));
    t.subsample_t = cfg.get_double(key("subsample_t"), t.subsample_t);
    auto min_tokens = cfg.get_int(key("min_corpus_tokens"), static_cast<long long>(t.min_corpus_tokens));
    if (min_tokens < 0) throw ConfigError(key("min_corpus_tokens") + " must be >= 0");
    t.min_corpus_tokens = static_cast<std::size_t>(min_tokens);
    t.strict = cfg.get_bool(key("strict"), t.strict);
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(section + ": " + e.what());
    }
    return t;
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json training_json(const TrainingConfig& t) {
    return {{"architecture", "cbow"}, {"dim", t.dim},
            {"window", t.window},     {"negative", t.negative},
            {"epochs", t.epochs},     {"initial_lr", t.initial_lr},
            {"min_count", t.min_count}, {"subsample_t", t.subsample_t},
            {"seed", t.seed},         {"min_corpus_tokens", t.min_corpus_tokens},
            {"strict", t.strict}};
}

// One command's artifacts plus its manifest. A stage refuses to overwrite
// artifacts that an earlier run produced under a different configuration.
class Stage {
public:
    Stage(const PipelineSettings& s, std::string name, std::vector<std::string> sections,
          std::string args)
        : settings_(s), name_(std::move(name)), sections_(std::move(sections)), args_(std::move(args)) {}

    void input(const fs::path& path, const std::string& what) {
        if (path.empty()) throw MissingArtifact(what + " (path not configured)");
        if (!fs::exists(path)) throw MissingArtifact(what + ": " + path.string());
        inputs_.push_back({{"path", path.generic_string()}, {"fnv1a64", hex64(hash_file(path))}});
    }

    void begin() {
        std::string material = settings_.source.canonical(sections_) + "args=" + args_ + "\n";
        for (const auto& in : inputs_) material += in.dump() + "\n";
        hash_ = hex64(fnv1a64(material));
        fs::path manifest = manifest_path();
        if (fs::exists(manifest)) {
            json previous = json::parse(read_file(manifest), nullptr, false);
            if (!previous.is_discarded() && previous.value("config_hash", "") != hash_) {
                throw ConfigError(settings_.output_dir.string() + " already holds `" + name_ +
                                  "` artifacts from a different configuration");
            }
        }
    }

    fs::path path(const fs::path& relative) const { return settings_.output_dir / relative; }

    void write(const fs::path& target, const std::string& content) {
        write_file(target, content);
        record(target);
    }

    void record(const fs::path& target) {
        outputs_.push_back({{"path", display(target)}, {"fnv1a64", hex64(hash_file(target))}});
    }

    json details = json::object();

    void finish() {
        json manifest = {{"command", name_},
                         {"args", args_},
                         {"config_hash", hash_},
                         {"seed", settings_.seed},
                         {"config", config_json()},
                         {"inputs", inputs_},
                         {"outputs", outputs_},
                         {"versions", {{"qexp", kVersion}, {"index_format", InvertedIndex::kFormatVersion}}},
                         {"details", details},
                         {"timestamp", utc_timestamp()}};
        write_file(manifest_path(), manifest.dump(2) + "\n");
    }

private:
    const PipelineSettings& settings_;
    std::string name_;
    std::vector<std::string> sections_;
    std::string args_;
    std::string hash_;
    json inputs_ = json::array();
    json outputs_ = json::array();

    fs::path manifest_path() const { return settings_.output_dir / "manifests" / (name_ + ".json"); }

    std::string display(const fs::path& target) const {
        auto rel = target.lexically_relative(settings_.output_dir);
        if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
        return target.generic_string();
    }

    json config_json() const {
        json c = json::object();
        std::istringstream lines(settings_.source.canonical(sections_));
        std::string line;
        while (std::getline(lines, line)) {
            auto eq = line.find('=');
            c[line.substr(0, eq)] = line.substr(eq + 1);
        }
        return c;
    }
};

fs::path store_docs_path(const PipelineSettings& s) { return s.output_dir / "store" / "documents.jsonl"; }
fs::path store_users_path(const PipelineSettings& s) { return s.output_dir / "store" / "users.jsonl"; }
fs::path index_path(const PipelineSettings& s) { return s.output_dir / "index" / "index.json"; }
fs::path global_model_path(const PipelineSettings& s) { return s.model_dir / "global.vec"; }
fs::path user_model_dir(const PipelineSettings& s) { return s.model_dir / "users"; }

fs::path meta_path(const fs::path& model) {
    auto p = model;
    p.replace_extension(".meta.json");
    return p;
}

DocumentStore load_store(const PipelineSettings& s) {
    return ingest_documents(store_docs_path(s), s.normalization);
}

void require(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw MissingArtifact(what + ": " + path.string());
}

void save_with_meta(Stage& stage, const EmbeddingModel& model, const fs::path& path, std::uint64_t seed) {
    fs::create_directories(path.parent_path());
    save_model(model, path);
    stage.record(path);
    json meta = {{"undertrained", model.undertrained()},
                 {"training_tokens", model.training_tokens()},
                 {"vocab_size", model.vocab_size()},
                 {"seed", seed},
                 {"epoch_losses", model.epoch_losses()},
                 {"config", training_json(model.config())}};
    stage.write(meta_path(path), meta.dump(2) + "\n");
}

std::shared_ptr<const EmbeddingModel> load_with_meta(const fs::path& path) {
    auto model = std::make_shared<EmbeddingModel>(load_model(path));
    auto meta_file = meta_path(path);
    if (fs::exists(meta_file)) {
        json meta = json::parse(read_file(meta_file), nullptr, false);
        if (!meta.is_discarded()) model->set_undertrained(meta.value("undertrained", false));
    }
    return model;
}

struct LoadedModels {
    ModelRegistry registry;
    std::vector<fs::path> files;
};

LoadedModels load_models(const PipelineSettings& s, bool need_global, bool need_users) {
    LoadedModels loaded;
    loaded.registry.refuse_undertrained = s.refuse_undertrained;
    if (need_global) {
        auto path = global_model_path(s);
        require(path, "global model (run `qexp train --scope global`)");
        loaded.registry.set_global(load_with_meta(path));
        loaded.files.push_back(path);
    }
    if (need_users) {
        auto dir = user_model_dir(s);
        require(dir, "user models (run `qexp train --scope all-users`)");
        std::vector<fs::path> entries;
        for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path());
        std::sort(entries.begin(), entries.end());
        for (const auto& p : entries) {
            auto name = p.filename().string();
            if (name.ends_with(".vec")) {
                loaded.registry.set_user(p.stem().string(), load_with_meta(p));
                loaded.files.push_back(p);
            } else if (name.ends_with(".failed.json")) {
                json f = json::parse(read_file(p), nullptr, false);
                std::string user = name.substr(0, name.size() - std::string(".failed.json").size());
                if (!loaded.registry.user(user)) {
                    loaded.registry.set_user_failure(user, f.is_discarded() ? "training failed"
                                                                            : f.value("reason", "training failed"));
                }
                loaded.files.push_back(p);
            }
        }
    }
    return loaded;
}

std::vector<Topic> load_experiment_topics(const PipelineSettings& s) {
    auto topics = load_topics(s.topics);
    if (fs::exists(store_users_path(s))) {
        flag_unresolved_topics(topics, ingest_users(store_users_path(s)));
    } else {
        for (auto& t : topics) t.user_resolved = false;
    }
    if (s.topic_subset.empty()) return topics;
    std::set<std::string> wanted(s.topic_subset.begin(), s.topic_subset.end());
    std::vector<Topic> subset;
    for (auto& t : topics) {
        if (wanted.erase(t.topic_id)) subset.push_back(std::move(t));
    }
    if (!wanted.empty()) throw ConfigError("experiment.topics names unknown topic " + *wanted.begin());
    return subset;
}

StopLists load_stoplists(const PipelineSettings& s) {
    require(s.stopwords, "stopword list");
    require(s.stop_adjectives, "stop-adjective list");
    return StopLists::load(s.stopwords, s.stop_adjectives);
}

json eval_json(const EvalResult& r) {
    json per = json::object();
    for (const auto& [topic, m] : r.per_topic) per[topic] = {{"ap", m.ap}, {"rr", m.rr}, {"p10", m.p10}};
    return {{"map", r.map}, {"mrr", r.mrr}, {"p10", r.p_at_10}, {"per_topic", per},
            {"excluded_topics", r.excluded_topics}};
}

std::string expansions_jsonl(const PreparedQueries& p) {
    std::string out;
    for (std::size_t i = 0; i < p.queries.size(); ++i) {
        out += expansion_audit_line(p.queries[i], p.expansions[i]) + "\n";
    }
    return out;
}

std::string skips_jsonl(std::span<const SkipRecord> skips) {
    std::string out;
    for (const auto& s : skips) out += json{{"topic_id", s.topic_id}, {"reason", s.reason}}.dump() + "\n";
    return out;
}

std::string conf_label(ConfId id, std::size_t k) {
    return to_string(id) + "_k" + std::to_string(k);
}

const std::vector<std::string> kTopicSections = {"paths.topics", "paths.users", "paths.stopwords",
                                                 "paths.stop_adjectives", "textprep", "experiment",
                                                 "index", "general"};

// ---- commands -------------------------------------------------------------

int cmd_ingest(const PipelineSettings& s, std::ostream& out) {
    Stage stage(s, "ingest", {"paths.corpus", "paths.users", "textprep"}, "ingest");
    stage.input(s.corpus, "document corpus");
    if (!s.users.empty()) stage.input(s.users, "user profiles");
    stage.begin();

    IngestReport docs_report;
    auto store = ingest_documents(s.corpus, s.normalization, &docs_report);
    stage.write(store_docs_path(s), serialize_store(store));
    stage.details["documents"] = {{"accepted", docs_report.accepted},
                                  {"malformed", docs_report.malformed},
                                  {"duplicates", docs_report.duplicates},
                                  {"messages", docs_report.messages}};
    out << "ingested " << docs_report.accepted << " documents (" << docs_report.malformed
        << " malformed, " << docs_report.duplicates << " duplicate)\n";

    if (!s.users.empty()) {
        IngestReport users_report;
        auto users = ingest_users(s.users, &users_report);
        std::size_t missing = 0;
        for (const auto& u : users.users()) {
            for (const auto& d : u.catalog) missing += store.contains(d) ? 0 : 1;
        }
        stage.write(store_users_path(s), serialize_users(users));
        stage.details["users"] = {{"accepted", users_report.accepted},
                                  {"malformed", users_report.malformed},
                                  {"duplicates", users_report.duplicates},
                                  {"missing_catalog_documents", missing},
                                  {"messages", users_report.messages}};
        out << "ingested " << users_report.accepted << " users (" << missing
            << " catalog entries reference unknown documents)\n";
    }
    stage.finish();
    return kExitOk;
}

int cmd_index(const PipelineSettings& s, std::ostream& out) {
    Stage stage(s, "index", {"textprep"}, "index");
    stage.input(store_docs_path(s), "document store (run `qexp ingest`)");
    stage.begin();
    auto idx = InvertedIndex::build(load_store(s));
    fs::create_directories(index_path(s).parent_path());
    idx.save(index_path(s));
    stage.record(index_path(s));
    stage.details = {{"documents", idx.num_docs()}, {"terms", idx.num_terms()},
                     {"total_tokens", idx.total_tokens()}};
    stage.finish();
    out << "indexed " << idx.num_docs() << " documents, " << idx.num_terms() << " terms, "
        << idx.total_tokens() << " tokens\n";
    return kExitOk;
}

int cmd_train(const PipelineSettings& s, const std::vector<std::string>& scope, std::ostream& out,
              std::ostream& err) {
    if (scope.empty()) throw ConfigError("--scope requires global, user <id> or all-users");
    const std::string& kind = scope[0];
    if (kind == "global") {
        if (scope.size() != 1) throw ConfigError("--scope global takes no user id");
        Stage stage(s, "train-global", {"embed", "general"}, "train global");
        stage.input(store_docs_path(s), "document store (run `qexp ingest`)");
        stage.begin();
        auto stream = build_training_stream(load_store(s));
        auto model = train(stream, s.global_training);
        save_with_meta(stage, model, global_model_path(s), s.global_training.seed);
        stage.details = {{"vocab_size", model.vocab_size()}, {"tokens", stream.size()},
                         {"undertrained", model.undertrained()}};
        stage.finish();
        out << "trained global model: " << model.vocab_size() << " terms, " << stream.size() << " tokens\n";
        return kExitOk;
    }

    std::vector<std::string> wanted;
    std::string stage_name;
    if (kind == "user") {
        if (scope.size() != 2) throw ConfigError("--scope user requires a user id");
        wanted.push_back(scope[1]);
        stage_name = "train-user-" + scope[1];
    } else if (kind == "all-users") {
        if (scope.size() != 1) throw ConfigError("--scope all-users takes no user id");
        stage_name = "train-all-users";
    } else {
        throw ConfigError("unknown --scope `" + kind + "`");
    }

    Stage stage(s, stage_name, {"embed", "embed_user", "general"}, "train " + kind + (wanted.empty() ? "" : " " + wanted[0]));
    stage.input(store_docs_path(s), "document store (run `qexp ingest`)");
    stage.input(store_users_path(s), "user store (run `qexp ingest` with paths.users)");
    stage.begin();
    auto store = load_store(s);
    auto users = ingest_users(store_users_path(s));
    if (wanted.empty()) {
        for (const auto& u : users.users()) wanted.push_back(u.user_id);
    } else if (!users.find(wanted[0])) {
        throw ConfigError("unknown user `" + wanted[0] + "`");
    }

    json trained = json::array();
    json failures = json::array();
    for (const auto& user_id : wanted) {
        const UserProfile& user = *users.find(user_id);
        auto profile = build_profile_document(user, store);
        auto cfg = s.user_training;
        cfg.seed = user_seed(s.seed, user_id);
        auto model_path = user_model_dir(s) / (user_id + ".vec");
        std::string reason;
        if (profile.word_count == 0) {
            reason = "empty profile";
        } else {
            try {
                auto model = train(build_training_stream(profile), cfg);
                save_with_meta(stage, model, model_path, cfg.seed);
                trained.push_back({{"user_id", user_id},
                                   {"tokens", profile.word_count},
                                   {"vocab_size", model.vocab_size()},
                                   {"undertrained", model.undertrained()},
                                   {"missing_catalog_documents", profile.missing_documents}});
                continue;
            } catch (const TrainingError& e) {
                reason = e.what();
            }
        }
        failures.push_back({{"user_id", user_id}, {"reason", reason}});
        stage.write(user_model_dir(s) / (user_id + ".failed.json"),
                    json{{"user_id", user_id}, {"reason", reason}}.dump() + "\n");
    }
    stage.details = {{"trained", trained}, {"failures", failures}};
    stage.finish();
    out << "trained " << trained.size() << " user models, " << failures.size() << " skipped\n";
    for (const auto& f : failures) {
        err << "skipped user " << f["user_id"].get<std::string>() << ": " << f["reason"].get<std::string>() << "\n";
    }
    if (kind == "user" && !failures.empty()) return kExitFailure;
    return kExitOk;
}

ConfId require_conf(const std::string& text) {
    auto id = parse_conf_id(text);
    if (!id) throw ConfigError("unknown configuration `" + text + "` (expected Conf1..Conf6)");
    return *id;
}

int cmd_expand(const PipelineSettings& s, const std::string& conf_text, std::ostream& out) {
    auto id = require_conf(conf_text);
    auto cfg = ExperimentConfig::table_row(id, s.k, s.scoring.mu, s.top_n);
    const std::string label = conf_label(id, s.k);
    Stage stage(s, "expand-" + label, kTopicSections, "expand " + label);
    stage.input(s.topics, "topics");
    bool expands = cfg.expansion != ExpansionKind::none && cfg.k > 0;
    auto models = load_models(s, expands && cfg.expansion == ExpansionKind::non_personalized,
                              expands && cfg.expansion == ExpansionKind::personalized);
    for (const auto& f : models.files) stage.input(f, "model");
    auto stoplists = load_stoplists(s);
    stage.begin();
    auto topics = load_experiment_topics(s);
    auto prepared = prepare_queries(cfg, topics, models.registry, stoplists, s.normalization);
    stage.write(stage.path("expansions/" + label + ".jsonl"), expansions_jsonl(prepared));
    stage.write(stage.path("expansions/" + label + ".skips.jsonl"), skips_jsonl(prepared.skips));
    stage.details = {{"queries", prepared.queries.size()}, {"skipped", prepared.skips.size()}};
    stage.finish();
    out << "expanded " << prepared.queries.size() << " topics, " << prepared.skips.size() << " skipped\n";
    return kExitOk;
}

int cmd_search(const PipelineSettings& s, const std::string& conf_text, std::ostream& out) {
    auto id = require_conf(conf_text);
    auto cfg = ExperimentConfig::table_row(id, s.k, s.scoring.mu, s.top_n);
    const std::string label = conf_label(id, s.k);
    Stage stage(s, "search-" + label, kTopicSections, "search " + label);
    stage.input(index_path(s), "index (run `qexp index`)");
    stage.input(s.topics, "topics");
    bool expands = cfg.expansion != ExpansionKind::none && cfg.k > 0;
    auto models = load_models(s, expands && cfg.expansion == ExpansionKind::non_personalized,
                              expands && cfg.expansion == ExpansionKind::personalized);
    for (const auto& f : models.files) stage.input(f, "model");
    auto stoplists = load_stoplists(s);
    stage.begin();
    auto idx = InvertedIndex::load(index_path(s));
    auto topics = load_experiment_topics(s);
    ExperimentInputs inputs{idx, models.registry, stoplists, s.normalization, s.run_tag};
    auto outcome = run_configuration(cfg, topics, inputs);
    stage.write(stage.path("runs/" + label + ".run"), format_run(outcome.run));
    stage.write(stage.path("runs/" + label + ".expansions.jsonl"), outcome.audit_jsonl());
    stage.write(stage.path("runs/" + label + ".skips.jsonl"), outcome.skips_jsonl());
    stage.details = {{"topics", outcome.run.topics().size()}, {"skipped", outcome.skips.size()}};
    stage.finish();
    out << "wrote " << (s.output_dir / "runs" / (label + ".run")).string() << " ("
        << outcome.run.topics().size() << " topics, " << outcome.skips.size() << " skipped)\n";
    return kExitOk;
}

int cmd_eval(const PipelineSettings& s, const fs::path& run_path, std::ostream& out) {
    if (run_path.empty()) throw ConfigError("eval requires --run <file>");
    const std::string stem = run_path.stem().string();
    Stage stage(s, "eval-" + stem, {"paths.qrels"}, "eval " + run_path.generic_string());
    stage.input(run_path, "run file");
    stage.input(s.qrels, "qrels");
    stage.begin();
    auto result = evaluate_run(read_run(run_path), load_qrels(s.qrels));
    stage.write(stage.path("eval/" + stem + ".json"), eval_json(result).dump(2) + "\n");
    stage.details = {{"map", result.map}, {"mrr", result.mrr}, {"p10", result.p_at_10}};
    stage.finish();
    char line[128];
    std::snprintf(line, sizeof line, "map %.4f  mrr %.4f  p10 %.4f  (%zu topics, %zu excluded)\n",
                  result.map, result.mrr, result.p_at_10, result.per_topic.size(),
                  result.excluded_topics.size());
    out << line;
    return kExitOk;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
    auto dots = text.find("..");
    if (dots == std::string::npos) throw ConfigError("--sweep-k expects A..B");
    try {
        std::size_t used = 0;
        auto a = std::stoul(text.substr(0, dots), &used);
        if (used != dots) throw std::invalid_argument("trailing");
        auto tail = text.substr(dots + 2);
        auto b = std::stoul(tail, &used);
        if (used != tail.size()) throw std::invalid_argument("trailing");
        if (a > b || a < 1) throw std::invalid_argument("order");
        return {a, b};
    } catch (const std::invalid_argument&) {
        throw ConfigError("--sweep-k expects A..B with 1 <= A <= B");
    } catch (const std::out_of_range&) {
        throw ConfigError("--sweep-k value out of range");
    }
}

int cmd_experiment(const PipelineSettings& s, const std::string& sweep, std::ostream& out) {
    std::optional<std::pair<std::size_t, std::size_t>> range;
    if (!sweep.empty()) range = parse_range(sweep);

    Stage stage(s, "experiment", kTopicSections, "experiment" + (sweep.empty() ? "" : " --sweep-k " + sweep));
    stage.input(index_path(s), "index (run `qexp index`)");
    stage.input(s.topics, "topics");
    stage.input(s.qrels, "qrels");
    auto models = load_models(s, true, true);
    for (const auto& f : models.files) stage.input(f, "model");
    auto stoplists = load_stoplists(s);
    stage.begin();

    auto idx = InvertedIndex::load(index_path(s));
    auto topics = load_experiment_topics(s);
    auto qrels = load_qrels(s.qrels);
    ExperimentInputs inputs{idx, models.registry, stoplists, s.normalization, s.run_tag};

    std::vector<SweepRow> results;
    json skipped = json::object();
    for (auto id : kAllConfs) {
        auto cfg = ExperimentConfig::table_row(id, s.k, s.scoring.mu, s.top_n);
        auto outcome = run_configuration(cfg, topics, inputs);
        const std::string name = to_string(id);
        stage.write(stage.path("experiment/" + name + ".run"), format_run(outcome.run));
        stage.write(stage.path("experiment/" + name + ".expansions.jsonl"), outcome.audit_jsonl());
        stage.write(stage.path("experiment/" + name + ".skips.jsonl"), outcome.skips_jsonl());
        auto r = evaluate_run(outcome.run, qrels);
        results.push_back({id, is_expanding(id) ? s.k : 0, r.map, r.mrr, r.p_at_10});
        skipped[name] = outcome.skips.size();
    }
    stage.write(stage.path("experiment/results.csv"), format_sweep_csv(results));
    out << format_sweep_csv(results);

    if (range) {
        auto observer = [&](const ExperimentConfig& cfg, const RunOutcome& outcome) {
            if (!is_expanding(cfg.conf_id)) return;
            const std::string label = conf_label(cfg.conf_id, cfg.k);
            stage.write(stage.path("experiment/sweep/" + label + ".run"), format_run(outcome.run));
            stage.write(stage.path("experiment/sweep/" + label + ".expansions.jsonl"), outcome.audit_jsonl());
            stage.write(stage.path("experiment/sweep/" + label + ".skips.jsonl"), outcome.skips_jsonl());
        };
        ExperimentConfig base = ExperimentConfig::table_row(ConfId::Conf1, 0, s.scoring.mu, s.top_n);
        auto rows = sweep_k(s.sweep_confs, range->first, range->second, topics, inputs, qrels, base, observer);
        stage.write(stage.path("experiment/sweep.csv"), format_sweep_csv(rows));
        stage.details["sweep_rows"] = rows.size();
        out << "sweep: " << rows.size() << " rows -> " << stage.path("experiment/sweep.csv").string() << "\n";
    }
    stage.details["skipped_topics"] = skipped;
    stage.details["topics"] = topics.size();
    stage.finish();
    return kExitOk;
}

void apply_environment(Config& cfg) {
    static const std::pair<const char*, const char*> vars[] = {
        {"QEXP_CORPUS", "paths.corpus"},         {"QEXP_USERS", "paths.users"},
        {"QEXP_TOPICS", "paths.topics"},         {"QEXP_QRELS", "paths.qrels"},
        {"QEXP_MODEL_DIR", "paths.model_dir"},   {"QEXP_OUTPUT_DIR", "paths.output_dir"},
        {"QEXP_STOPWORDS", "paths.stopwords"},   {"QEXP_STOP_ADJECTIVES", "paths.stop_adjectives"},
    };
    for (const auto& [var, key] : vars) {
        if (const char* v = std::getenv(var); v && *v) cfg.set(key, v);
    }
}

}  // namespace

std::uint64_t user_seed(std::uint64_t seed, const std::string& user_id) {
    return fnv1a64(user_id, seed ^ 0xcbf29ce484222325ULL);
}

PipelineSettings resolve_settings(const Config& cfg) {
    PipelineSettings s;
    s.source = cfg;
    s.corpus = cfg.get_path("paths.corpus", {});
    s.users = cfg.get_path("paths.users", {});
    s.topics = cfg.get_path("paths.topics", {});
    s.qrels = cfg.get_path("paths.qrels", {});
    s.output_dir = cfg.get_path("paths.output_dir", "qexp_out");
    s.model_dir = cfg.get_path("paths.model_dir", s.output_dir / "models");
    s.stopwords = cfg.get_path("paths.stopwords", fs::path(QEXP_DATA_DIR) / "stopwords.txt");
    s.stop_adjectives = cfg.get_path("paths.stop_adjectives", fs::path(QEXP_DATA_DIR) / "stop_adjectives.txt");

    s.normalization.lowercase = cfg.get_bool("textprep.lowercase", true);
    s.normalization.strip_html = cfg.get_bool("textprep.strip_html", true);
    auto punct = cfg.get_string("textprep.punctuation", "strip");
    if (punct == "strip") {
        s.normalization.punctuation = PunctuationPolicy::strip;
    } else if (punct == "keep_intraword_hyphen") {
        s.normalization.punctuation = PunctuationPolicy::keep_intraword_hyphen;
    } else {
        throw ConfigError("textprep.punctuation must be strip or keep_intraword_hyphen");
    }

    auto seed = cfg.get_int("general.seed", 1);
    if (seed < 0) throw ConfigError("general.seed must be >= 0");
    s.seed = static_cast<std::uint64_t>(seed);

    TrainingConfig base;
    base.seed = s.seed;
    s.global_training = read_training(cfg, "embed", base);
    s.user_training = read_training(cfg, "embed_user", personalized_defaults(s.global_training));

    s.scoring.mu = cfg.get_double("index.mu", 50.0);
    if (!(s.scoring.mu > 0.0)) throw ConfigError("index.mu must be > 0");

    auto k = cfg.get_int("experiment.k", 5);
    if (k < 0) throw ConfigError("experiment.k must be >= 0");
    s.k = static_cast<std::size_t>(k);
    auto top_n = cfg.get_int("experiment.top_n", 1000);
    if (top_n < 1) throw ConfigError("experiment.top_n must be >= 1");
    s.top_n = static_cast<std::size_t>(top_n);
    auto confs = cfg.get_list("experiment.sweep_confs");
    if (confs.empty()) confs = {"Conf3", "Conf4", "Conf5", "Conf6"};
    for (const auto& c : confs) {
        auto id = parse_conf_id(c);
        if (!id) throw ConfigError("experiment.sweep_confs: unknown configuration `" + c + "`");
        if (!is_expanding(*id)) throw ConfigError("experiment.sweep_confs: " + c + " does not expand");
        s.sweep_confs.push_back(*id);
    }
    s.topic_subset = cfg.get_list("experiment.topics");
    s.run_tag = cfg.get_string("experiment.run_tag", "qexp");
    if (s.run_tag.empty() || s.run_tag.find_first_of(" \t") != std::string::npos) {
        throw ConfigError("experiment.run_tag must be a single non-empty token");
    }
    s.refuse_undertrained = cfg.get_bool("experiment.refuse_undertrained", true);
    return s;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Personalized query expansion with word embeddings"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--set", overrides, "section.key=value override (repeatable)");

    // Flags that override one config key each.
    std::map<std::string, std::string> flag_values;
    struct KeyFlag {
        const char* flag;
        const char* key;
        const char* help;
    };
    static const KeyFlag key_flags[] = {
        {"--corpus", "paths.corpus", "documents JSON-lines"},
        {"--users", "paths.users", "user profiles JSON-lines"},
        {"--topics", "paths.topics", "topics TSV"},
        {"--qrels", "paths.qrels", "relevance judgments"},
        {"--model-dir", "paths.model_dir", "model directory"},
        {"--output-dir", "paths.output_dir", "output directory"},
        {"--stopwords", "paths.stopwords", "stopword list"},
        {"--stop-adjectives", "paths.stop_adjectives", "stop-adjective list"},
        {"--seed", "general.seed", "random seed"},
        {"--mu", "index.mu", "Dirichlet prior"},
        {"--k", "experiment.k", "expansion terms per query term"},
        {"--top-n", "experiment.top_n", "documents retrieved per topic"},
        {"--run-tag", "experiment.run_tag", "run tag"},
        {"--dim", "embed.dim", "vector size"},
        {"--window", "embed.window", "context window"},
        {"--negative", "embed.negative", "negative samples"},
        {"--epochs", "embed.epochs", "training epochs"},
        {"--lr", "embed.initial_lr", "initial learning rate"},
        {"--min-count", "embed.min_count", "minimum term count (global model)"},
        {"--subsample", "embed.subsample_t", "subsampling threshold"},
    };
    for (const auto& f : key_flags) {
        app.add_option_function<std::string>(
               f.flag, [&flag_values, key = f.key](const std::string& v) { flag_values[key] = v; }, f.help)
            ->trigger_on_parse();
    }

    auto* ingest = app.add_subcommand("ingest", "ingest documents and user profiles");
    auto* index = app.add_subcommand("index", "build the inverted index");
    auto* train_cmd = app.add_subcommand("train", "train word embeddings");
    std::vector<std::string> scope;
    train_cmd->add_option("--scope", scope, "global | user <id> | all-users")->expected(1, 2)->required();
    auto* expand = app.add_subcommand("expand", "write expanded queries for one configuration");
    std::string conf = "Conf3";
    expand->add_option("--conf", conf, "Conf1..Conf6");
    auto* search_cmd = app.add_subcommand("search", "rank documents for one configuration");
    search_cmd->add_option("--conf", conf, "Conf1..Conf6");
    auto* eval = app.add_subcommand("eval", "evaluate a run file");
    std::string run_path;
    eval->add_option("--run", run_path, "run file")->required();
    auto* experiment = app.add_subcommand("experiment", "run all six configurations");
    std::string sweep;
    experiment->add_option("--sweep-k", sweep, "k range A..B for the sweep table");
    for (auto* sub : {ingest, index, train_cmd, expand, search_cmd, eval, experiment}) sub->fallthrough();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitBadConfig;
    }

    try {
        Config cfg;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw MissingArtifact("config file: " + config_path);
            cfg = Config::load(config_path);
        }
        apply_environment(cfg);
        for (const auto& o : overrides) {
            auto eq = o.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value");
            cfg.set(o.substr(0, eq), o.substr(eq + 1));
        }
        for (const auto& [key, value] : flag_values) cfg.set(key, value);
        auto settings = resolve_settings(cfg);

        if (ingest->parsed()) return cmd_ingest(settings, out);
        if (index->parsed()) return cmd_index(settings, out);
        if (train_cmd->parsed()) return cmd_train(settings, scope, out, err);
        if (expand->parsed()) return cmd_expand(settings, conf, out);
        if (search_cmd->parsed()) return cmd_search(settings, conf, out);
        if (eval->parsed()) return cmd_eval(settings, run_path, out);
        if (experiment->parsed()) return cmd_experiment(settings, sweep, out);
        return kExitBadConfig;
    } catch (const MissingArtifact& e) {
        err << "error: missing " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace qexp
