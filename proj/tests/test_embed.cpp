#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles/finite_diff.hpp"
#include "qexp/embed.hpp"
#include "support.hpp"

using namespace qexp;

namespace {

using Terms = std::vector<std::string>;

TrainingConfig small_config() {
    TrainingConfig cfg;
    cfg.dim = 16;
    cfg.window = 3;
    cfg.negative = 5;
    cfg.epochs = 3;
    cfg.min_count = 1;
    cfg.subsample_t = 0.0;
    cfg.min_corpus_tokens = 100;
    cfg.seed = 9;
    return cfg;
}

Terms random_stream(std::size_t n, int vocab, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> w(0, vocab - 1);
    Terms out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("w" + std::to_string(w(rng)));
    return out;
}

// "alpha" and "beta" fill the same slot in the windows of one topic and
// appear together in a fifth of those windows.
Terms alpha_beta_stream() {
    std::mt19937 rng(42);
    std::uniform_int_distribution<int> topic(0, 19), word(0, 9), len(6, 10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Terms stream;
    for (int s = 0; s < 10000; ++s) {
        bool planted = s % 5 == 0;
        int t = planted ? 0 : topic(rng);
        int n = len(rng);
        Terms sent;
        for (int i = 0; i < n; ++i) sent.push_back("w" + std::to_string(t) + "_" + std::to_string(word(rng)));
        if (planted) {
            double r = u(rng);
            int p = std::uniform_int_distribution<int>(0, n - 1)(rng);
            if (r < 0.4) {
                sent[p] = "alpha";
            } else if (r < 0.8) {
                sent[p] = "beta";
            } else {
                sent[p] = "alpha";
                sent[(p + 3) % n] = "beta";
            }
        }
        stream.insert(stream.end(), sent.begin(), sent.end());
    }
    return stream;
}

EmbeddingModel hand_model(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
    std::vector<VocabEntry> vocab;
    Matrix input(rows.size(), rows.front().second.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        vocab.push_back({rows[r].first, 1});
        std::copy(rows[r].second.begin(), rows[r].second.end(), input.row(r).begin());
    }
    return EmbeddingModel(std::move(vocab), std::move(input), Matrix{}, TrainingConfig{});
}

}  // namespace

TEST_CASE("training streams") {
    DocumentStore store;
    store.add({"d1", "t", "", "", std::nullopt, {}, "a b"});
    store.add({"d2", "", "", "", std::nullopt, {}, "c"});
    store.add({"d3", "", "", "", std::nullopt, {}, ""});
    CHECK(build_training_stream(store) == Terms{"a", "b", "c"});
    CHECK(build_training_stream(ProfileDocument{}).empty());
    ProfileDocument p;
    p.text = "x y x";
    CHECK(build_training_stream(p) == Terms{"x", "y", "x"});
}

TEST_CASE("vocabulary") {
    Terms s = {"b", "a", "c", "a", "b", "d", "a"};
    auto v = build_vocab(s, 1);
    REQUIRE(v.size() == 4);
    CHECK(v[0] == VocabEntry{"a", 3});
    CHECK(v[1] == VocabEntry{"b", 2});
    CHECK(v[2] == VocabEntry{"c", 1});
    CHECK(v[3] == VocabEntry{"d", 1});
    auto v2 = build_vocab(s, 2);
    CHECK(v2.size() == 2);
    for (const auto& e : v2) CHECK(e.count >= 2);
}

TEST_CASE("config validation") {
    TrainingConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto bad = [](auto mutate) {
        TrainingConfig c;
        mutate(c);
        return c;
    };
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.epochs = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.dim = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.window = 0; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.negative = -1; }).validate(), std::invalid_argument);
    CHECK_THROWS_AS(bad([](TrainingConfig& c) { c.initial_lr = 0; }).validate(), std::invalid_argument);
    auto p = personalized_defaults();
    CHECK(p.min_count == 1);
    CHECK_FALSE(p.strict);
    CHECK(p.dim == 500);
    CHECK(p.window == 8);
    CHECK(p.negative == 25);
}

TEST_CASE("analytic gradient matches finite differences") {
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> val(-0.5, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t vocab = 6, dim = 4;
        Matrix in(vocab, dim), out(vocab, dim);
        for (auto& x : in.data()) x = val(rng);
        for (auto& x : out.data()) x = val(rng);
        std::vector<std::uint32_t> ctx = {0, 2, 2, 5}, neg = {1, 3, 3};
        CbowExample ex{ctx, 4, neg};
        Matrix gin(vocab, dim), gout(vocab, dim);
        double loss = cbow_ns_gradient(in, out, ex, gin, gout);
        CHECK(loss == doctest::Approx(cbow_ns_loss(in, out, ex)));
        auto num_in = oracle::central_gradient(in.data(), [&] { return cbow_ns_loss(in, out, ex); });
        auto num_out = oracle::central_gradient(out.data(), [&] { return cbow_ns_loss(in, out, ex); });
        CHECK(oracle::relative_error(gin.data(), num_in) < 1e-6);
        CHECK(oracle::relative_error(gout.data(), num_out) < 1e-6);
    }
}

TEST_CASE("an SGD step moves against the gradient") {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> val(-0.5, 0.5);
    Matrix in(5, 3), out(5, 3);
    for (auto& x : in.data()) x = val(rng);
    for (auto& x : out.data()) x = val(rng);
    std::vector<std::uint32_t> ctx = {0, 1}, neg = {3, 4};
    CbowExample ex{ctx, 2, neg};
    Matrix gin(5, 3), gout(5, 3);
    cbow_ns_gradient(in, out, ex, gin, gout);
    Matrix in2 = in, out2 = out;
    const double lr = 0.1;
    double before = cbow_ns_sgd_step(in2, out2, ex, lr);
    CHECK(before == doctest::Approx(cbow_ns_loss(in, out, ex)));
    for (std::size_t i = 0; i < in.data().size(); ++i) {
        CHECK(in2.data()[i] == doctest::Approx(in.data()[i] - lr * gin.data()[i]).epsilon(1e-12));
        CHECK(out2.data()[i] == doctest::Approx(out.data()[i] - lr * gout.data()[i]).epsilon(1e-12));
    }
    CHECK(cbow_ns_loss(in2, out2, ex) < before);
}

TEST_CASE("training is deterministic and finite") {
    auto stream = random_stream(3000, 40, 4);
    auto cfg = small_config();
    auto a = train(stream, cfg);
    auto b = train(stream, cfg);
    CHECK(a.input_vectors() == b.input_vectors());
    CHECK(a.output_vectors() == b.output_vectors());
    CHECK(a.vocab() == b.vocab());
    for (double x : a.input_vectors().data()) CHECK(std::isfinite(x));
    for (double x : a.output_vectors().data()) CHECK(std::isfinite(x));
    CHECK(a.epoch_losses().size() == 3);
    CHECK(a.training_tokens() == 3000);

    cfg.seed = 10;
    CHECK_FALSE(train(stream, cfg).input_vectors() == a.input_vectors());
}

TEST_CASE("min_count prunes the vocabulary") {
    auto stream = random_stream(2000, 300, 8);
    auto cfg = small_config();
    cfg.min_count = 8;
    auto m = train(stream, cfg);
    CHECK(m.vocab_size() > 0);
    for (const auto& e : m.vocab()) CHECK(e.count >= 8);
}

TEST_CASE("short streams: strict rejects, permissive flags") {
    auto stream = random_stream(50, 10, 5);
    auto cfg = small_config();
    CHECK_THROWS_AS(train(stream, cfg), TrainingError);
    cfg.strict = false;
    auto m = train(stream, cfg);
    CHECK(m.undertrained());
    CHECK_FALSE(train(random_stream(500, 10, 5), cfg).undertrained());
    CHECK_THROWS_AS(train(Terms{}, cfg), TrainingError);
}

TEST_CASE("loss decreases over the first epochs") {
    auto stream = alpha_beta_stream();
    auto cfg = small_config();
    auto m = train(stream, cfg);
    const auto& l = m.epoch_losses();
    REQUIRE(l.size() == 3);
    CHECK(l[1] <= l[0] * 1.01);
    CHECK(l[2] <= l[1] * 1.01);
}

TEST_CASE("co-occurring interchangeable terms become neighbors") {
    auto cfg = small_config();
    cfg.dim = 50;
    cfg.window = 4;
    auto m = train(alpha_beta_stream(), cfg);
    auto nn = nearest_neighbors(m, "alpha", 3);
    REQUIRE(nn.size() == 3);
    bool found = false;
    for (const auto& n : nn) found = found || n.term == "beta";
    CHECK(found);
}

TEST_CASE("cosine") {
    std::vector<double> v = {0.3, -1.2, 2.0}, e1 = {1, 0}, e2 = {0, 1}, d = {1, 1}, z = {0, 0};
    CHECK(cosine(v, v) == doctest::Approx(1.0));
    CHECK(cosine(e1, e2) == doctest::Approx(0.0));
    CHECK(cosine(d, e1) == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(cosine(d, e1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(cosine(z, e1), std::invalid_argument);
    CHECK_THROWS_AS(cosine(v, e1), std::invalid_argument);
}

TEST_CASE("nearest neighbors match an exhaustive scan") {
    auto m = hand_model({{"book", {1.0, 0.1, 0.0}},
                         {"novel", {0.8, 0.3, 0.1}},
                         {"reading", {0.5, 0.5, 0.2}},
                         {"apple", {-0.2, 1.0, 0.4}},
                         {"zero", {0.0, 0.0, 0.0}},
                         {"tome", {0.8, 0.3, 0.1}}});
    CHECK(nearest_neighbors(m, "missing", 3).empty());

    for (const std::string term : {"book", "novel", "reading", "apple"}) {
        std::vector<Neighbor> scan;
        auto src = m.vector(*m.find(term));
        for (const auto& e : m.vocab()) {
            if (e.term == term || e.term == "zero") continue;
            scan.push_back({e.term, cosine(src, m.vector(*m.find(e.term)))});
        }
        std::sort(scan.begin(), scan.end(), [](const Neighbor& a, const Neighbor& b) {
            return a.similarity != b.similarity ? a.similarity > b.similarity : a.term < b.term;
        });
        auto got = nearest_neighbors(m, term, 10);
        REQUIRE(got.size() == scan.size());
        for (std::size_t i = 0; i < scan.size(); ++i) {
            CHECK(got[i].term == scan[i].term);
            CHECK(got[i].similarity == doctest::Approx(scan[i].similarity).epsilon(1e-12));
        }
        CHECK(nearest_neighbors(m, term, 2).size() == 2);
    }
    auto ties = nearest_neighbors(m, "book", 2);
    CHECK(ties[0].term == "novel");
    CHECK(ties[1].term == "tome");
    CHECK(nearest_neighbors(m, "book", 5, {"novel"})[0].term == "tome");
}

TEST_CASE("model text format") {
    testing::TempDir dir;
    auto cfg = small_config();
    auto m = train(random_stream(2000, 30, 6), cfg);
    save_model(m, dir / "m.vec");
    auto back = load_model(dir / "m.vec");
    REQUIRE(back.vocab_size() == m.vocab_size());
    REQUIRE(back.dim() == m.dim());
    for (std::size_t i = 0; i + 1 < m.vocab_size(); i += 3) {
        double before = cosine(m.vector(i), m.vector(i + 1));
        double after = cosine(back.vector(i), back.vector(i + 1));
        CHECK(std::abs(before - after) < 1e-6);
        CHECK(back.vocab()[i].term == m.vocab()[i].term);
    }

    auto expect_line = [&](const std::string& text, std::size_t line) {
        testing::write_text(dir / "bad.vec", text);
        try {
            load_model(dir / "bad.vec");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == line);
        }
    };
    std::string nine;
    for (int i = 0; i < 9; ++i) nine += "t" + std::to_string(i) + " 0.1 0.2\n";
    expect_line("10 2\n" + nine, 11);
    expect_line("2 3\na 1 2 3\nb 1 2\n", 3);
    expect_line("2 2\na 1 2\nb 1 x\n", 3);
    expect_line("two 2\n", 1);
    expect_line("1 2\na 1 2\nb 3 4\n", 3);
}
