#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>
#include <set>

#include "oracles/metric_oracle.hpp"
#include "qexp/eval.hpp"
#include "support.hpp"

using namespace qexp;

namespace {

using Terms = std::vector<std::string>;

Qrels qrels_of(const std::string& topic, const Terms& relevant) {
    Qrels q;
    for (const auto& d : relevant) q.set(topic, d, 1);
    return q;
}

StopLists test_lists() {
    return StopLists({"the", "to", "for", "a"}, {"good", "new", "favorite"});
}

struct Fixture {
    DocumentStore store;
    InvertedIndex index;
    ModelRegistry models;
    StopLists lists = test_lists();
    std::vector<Topic> topics;
    Qrels qrels;

    Fixture() {
        const std::vector<std::pair<const char*, const char*>> docs = {
            {"d1", "space opera with rockets and a galaxy"},
            {"d2", "the galaxy far away rockets"},
            {"d3", "baking bread for the family"},
            {"d4", "good bread recipes and baking tips"},
            {"d5", "a new space station story"},
            {"d6", "favorite recipes for a winter dinner"},
        };
        for (const auto& [id, text] : docs) store.add({id, "", "", "", std::nullopt, {}, text});
        index = InvertedIndex::build(store);

        auto make = [](std::vector<std::pair<std::string, std::vector<double>>> rows) {
            std::vector<VocabEntry> vocab;
            Matrix m(rows.size(), 2);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                vocab.push_back({rows[i].first, 1});
                m.at(i, 0) = rows[i].second[0];
                m.at(i, 1) = rows[i].second[1];
            }
            return std::make_shared<EmbeddingModel>(std::move(vocab), std::move(m), Matrix{}, TrainingConfig{});
        };
        models.set_global(make({{"space", {1, 0.1}}, {"galaxy", {1, 0.2}}, {"rockets", {0.9, 0.3}},
                                {"bread", {0.1, 1}}, {"baking", {0.2, 1}}, {"recipes", {0.3, 0.9}}}));
        models.set_user("u1", make({{"space", {1, 0}}, {"station", {1, 0.1}}, {"bread", {0, 1}},
                                    {"dinner", {0.1, 1}}}));
        models.set_user_failure("u2", "empty profile");

        topics = {{"t1", "u1", "Good space books", true},
                  {"t2", "u1", "New bread for the winter", true},
                  {"t3", "u2", "Galaxy rockets", true},
                  {"t4", "u1", "good new favorite", true},
                  {"t5", "u7", "space", false}};
        qrels.set("t1", "d1", 1);
        qrels.set("t1", "d5", 2);
        qrels.set("t2", "d3", 1);
        qrels.set("t2", "d4", 1);
        qrels.set("t3", "d2", 1);
    }

    ExperimentInputs inputs() const { return {index, models, lists, {}, "qexp"}; }
};

}  // namespace

TEST_CASE("metric hand cases") {
    auto q = qrels_of("t", {"a", "c"});
    Terms ranking = {"a", "b", "c", "d"};
    CHECK(average_precision(ranking, q, "t") == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(average_precision(ranking, q, "t") == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(average_precision(Terms{"a", "c", "x"}, q, "t") == doctest::Approx(1.0));
    CHECK(average_precision(Terms{"x", "y"}, q, "t") == 0.0);

    auto r = qrels_of("t", {"d"});
    CHECK(reciprocal_rank(ranking, r, "t") == doctest::Approx(0.25));
    CHECK(reciprocal_rank(Terms{}, r, "t") == 0.0);
    CHECK(precision_at(Terms{}, r, "t") == 0.0);

    auto three = qrels_of("t", {"a", "e", "j"});
    Terms ten = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"};
    CHECK(precision_at(ten, three, "t") == doctest::Approx(0.3));
    CHECK(precision_at(Terms{"a"}, three, "t") == doctest::Approx(0.1));
}

TEST_CASE("evaluate_run") {
    RunFile run;
    run.run_tag = "x";
    run.append({"t1", {{"a", -1}, {"b", -2}, {"c", -3}}});
    run.append({"t2", {{"z", -1}}});
    auto q = qrels_of("t1", {"a", "c"});
    q.set("t2", "z", 0);
    auto r = evaluate_run(run, q);
    CHECK(r.map == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(r.per_topic.size() == 1);
    CHECK(r.excluded_topics == Terms{"t2"});

    RunFile perfect;
    Qrels pq;
    for (const char* t : {"p1", "p2"}) {
        RankedList rl{t, {}};
        for (int i = 0; i < 12; ++i) {
            std::string d = std::string(t) + "_" + std::to_string(i);
            rl.docs.push_back({d, -static_cast<double>(i)});
            pq.set(t, d, 1);
        }
        perfect.append(rl);
    }
    auto pr = evaluate_run(perfect, pq);
    CHECK(pr.map == doctest::Approx(1.0));
    CHECK(pr.mrr == doctest::Approx(1.0));
    CHECK(pr.p_at_10 == doctest::Approx(1.0));
}

TEST_CASE("metrics agree with the definition-level oracle") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> ndocs(0, 30), nrel(0, 8), doc(0, 40);
        Terms ranking;
        std::set<std::string> seen;
        for (int i = ndocs(rng); i > 0; --i) {
            auto d = "d" + std::to_string(doc(rng));
            if (seen.insert(d).second) ranking.push_back(d);
        }
        std::set<std::string> relevant;
        Qrels q;
        for (int i = nrel(rng); i > 0; --i) {
            auto d = "d" + std::to_string(doc(rng));
            relevant.insert(d);
            q.set("t", d, 1 + (i % 2));
        }
        q.set("t", "d999", 0);
        auto want = oracle::topic_metrics(ranking, relevant);
        CHECK(average_precision(ranking, q, "t") == doctest::Approx(want.ap).epsilon(1e-12));
        CHECK(reciprocal_rank(ranking, q, "t") == doctest::Approx(want.rr).epsilon(1e-12));
        CHECK(precision_at(ranking, q, "t") == doctest::Approx(want.p10).epsilon(1e-12));
        for (double v : {want.ap, want.rr, want.p10}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("AP and RR depend only on where relevant documents sit") {
    auto q = qrels_of("t", {"r1", "r2", "r3"});
    Terms ranking = {"x1", "r1", "x2", "r2", "x3", "x4", "r3"};
    double ap = average_precision(ranking, q, "t"), rr = reciprocal_rank(ranking, q, "t");
    Terms shuffled = {"x4", "r2", "x3", "r3", "x1", "x2", "r1"};
    CHECK(average_precision(shuffled, q, "t") == doctest::Approx(ap));
    CHECK(reciprocal_rank(shuffled, q, "t") == doctest::Approx(rr));
    // Promoting a relevant document never lowers AP.
    Terms promoted = {"r1", "x1", "x2", "r2", "x3", "x4", "r3"};
    CHECK(average_precision(promoted, q, "t") >= ap);
}

TEST_CASE("run files") {
    testing::TempDir dir;
    RunFile run;
    run.run_tag = "tag";
    run.append({"399", {{"B1", -1.5}, {"B2", -2.25}}});
    CHECK(format_run(run) == "399 Q0 B1 1 -1.50000000 tag\n399 Q0 B2 2 -2.25000000 tag\n");
    write_run(run, dir / "r.run");
    auto back = read_run(dir / "r.run");
    CHECK(back.run_tag == "tag");
    CHECK(back.ranking("399") == Terms{"B1", "B2"});
    CHECK(format_run(back) == format_run(run));

    testing::write_text(dir / "bad.run", "399 Q0 B1 1 -1 tag\n399 Q0 B2\n");
    try {
        read_run(dir / "bad.run");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("configuration table") {
    using C = ConfId;
    auto row = [](C id) { return ExperimentConfig::table_row(id); };
    CHECK((row(C::Conf1).filtering == QueryForm::original && row(C::Conf1).expansion == ExpansionKind::none));
    CHECK((row(C::Conf2).filtering == QueryForm::filtered && row(C::Conf2).expansion == ExpansionKind::none));
    CHECK((row(C::Conf3).filtering == QueryForm::filtered &&
           row(C::Conf3).expansion == ExpansionKind::non_personalized));
    CHECK((row(C::Conf4).filtering == QueryForm::filtered && row(C::Conf4).expansion == ExpansionKind::personalized));
    CHECK((row(C::Conf5).filtering == QueryForm::original &&
           row(C::Conf5).expansion == ExpansionKind::non_personalized));
    CHECK((row(C::Conf6).filtering == QueryForm::original && row(C::Conf6).expansion == ExpansionKind::personalized));
    CHECK(row(C::Conf1).mu == 50.0);
    for (auto id : kAllConfs) CHECK(parse_conf_id(to_string(id)) == id);
    CHECK_FALSE(parse_conf_id("Conf7").has_value());
}

TEST_CASE("prepare_queries skips and records") {
    Fixture f;
    auto conf2 = prepare_queries(ExperimentConfig::table_row(ConfId::Conf2), f.topics, f.models, f.lists, {});
    REQUIRE(conf2.queries.size() == 3);
    CHECK(conf2.queries[0].all_terms == Terms{"space", "books"});
    CHECK(conf2.queries[1].all_terms == Terms{"bread", "winter"});
    REQUIRE(conf2.skips.size() == 2);
    CHECK(conf2.skips[0].topic_id == "t4");
    CHECK(conf2.skips[0].reason == "empty query after filtering");
    CHECK(conf2.skips[1].topic_id == "t5");
    CHECK(conf2.skips[1].reason == "user profile not found");

    auto conf4 = prepare_queries(ExperimentConfig::table_row(ConfId::Conf4, 1), f.topics, f.models, f.lists, {});
    CHECK(conf4.queries.size() == 2);
    bool t3_skipped = false;
    for (const auto& s : conf4.skips) {
        if (s.topic_id == "t3") t3_skipped = s.reason == "user model failed: empty profile";
    }
    CHECK(t3_skipped);
    CHECK(conf4.queries[0].all_terms == Terms{"space", "books", "station"});

    auto conf6 = prepare_queries(ExperimentConfig::table_row(ConfId::Conf6, 1), f.topics, f.models, f.lists, {});
    CHECK(conf6.queries[0].original_terms == Terms{"good", "space", "books"});

    // k = 0 consults no model, so even the failed user is served.
    auto conf4k0 = prepare_queries(ExperimentConfig::table_row(ConfId::Conf4, 0), f.topics, f.models, f.lists, {});
    CHECK(conf4k0.queries.size() == conf2.queries.size());
}

TEST_CASE("k = 0 runs equal the unexpanded baselines byte for byte") {
    Fixture f;
    auto in = f.inputs();
    auto text = [&](ConfId id) {
        return format_run(run_configuration(ExperimentConfig::table_row(id, 0), f.topics, in).run);
    };
    auto c1 = text(ConfId::Conf1), c2 = text(ConfId::Conf2);
    CHECK_FALSE(c1.empty());
    CHECK(text(ConfId::Conf3) == c2);
    CHECK(text(ConfId::Conf4) == c2);
    CHECK(text(ConfId::Conf5) == c1);
    CHECK(text(ConfId::Conf6) == c1);
}

TEST_CASE("run_configuration output invariants and determinism") {
    Fixture f;
    auto in = f.inputs();
    for (auto id : kAllConfs) {
        auto cfg = ExperimentConfig::table_row(id, 2);
        auto a = run_configuration(cfg, f.topics, in);
        CHECK(format_run(a.run) == format_run(run_configuration(cfg, f.topics, in).run));
        CHECK(a.queries.size() == a.expansions.size());
        for (const auto& topic : a.run.topics()) {
            int expected_rank = 0;
            double last = std::numeric_limits<double>::infinity();
            std::set<std::string> docs;
            for (const auto& e : a.run.entries) {
                if (e.topic_id != topic) continue;
                CHECK(e.rank == ++expected_rank);
                CHECK(e.score <= last);
                last = e.score;
                CHECK(docs.insert(e.doc_id).second);
            }
        }
    }
}

TEST_CASE("sweep rows and CSV round trip") {
    Fixture f;
    auto in = f.inputs();
    std::vector<ConfId> confs = {ConfId::Conf3, ConfId::Conf4};
    std::size_t observed = 0;
    auto rows = sweep_k(confs, 1, 10, f.topics, in, f.qrels, ExperimentConfig{},
                        [&](const ExperimentConfig&, const RunOutcome&) { ++observed; });
    CHECK(rows.size() == 22);
    CHECK(observed == 22);
    CHECK(rows[0].conf == ConfId::Conf1);
    CHECK(rows[1].conf == ConfId::Conf2);
    CHECK(rows[0].k == 0);
    CHECK(rows.back().conf == ConfId::Conf4);
    CHECK(rows.back().k == 10);

    auto csv = format_sweep_csv(rows);
    CHECK(csv.starts_with("conf,k,map,mrr,p10\n"));
    auto back = parse_sweep_csv(csv);
    REQUIRE(back.size() == rows.size());
    CHECK(format_sweep_csv(back) == csv);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back[i].map == doctest::Approx(rows[i].map).epsilon(1e-4));

    CHECK_THROWS_AS(parse_sweep_csv("bad header\n"), ParseError);
    CHECK_THROWS(sweep_k(confs, 3, 2, f.topics, in, f.qrels, ExperimentConfig{}));
}
