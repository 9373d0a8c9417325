#include "qexp/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace qexp {

namespace {

double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Forward and backward pass for one example, with parameters held fixed.
struct ExampleGrad {
    double loss = 0.0;
    std::vector<double> hidden;         // mean context vector
    std::vector<double> coeff;          // dLoss/dScore per target, center first
    std::vector<double> grad_hidden;    // dLoss/dHidden
};

void forward_backward(const Matrix& input, const Matrix& output, const CbowExample& ex,
                      ExampleGrad& g) {
    const std::size_t dim = input.cols();
    g.hidden.assign(dim, 0.0);
    g.grad_hidden.assign(dim, 0.0);
    g.coeff.clear();
    g.loss = 0.0;
    if (ex.context.empty()) return;

    for (auto c : ex.context) {
        auto v = input.row(c);
        for (std::size_t i = 0; i < dim; ++i) g.hidden[i] += v[i];
    }
    const double inv = 1.0 / static_cast<double>(ex.context.size());
    for (auto& h : g.hidden) h *= inv;

    auto target = [&](std::uint32_t row, double label) {
        auto u = output.row(row);
        double s = dot(u, g.hidden);
        g.loss -= label > 0.5 ? log_sigmoid(s) : log_sigmoid(-s);
        double c = sigmoid(s) - label;
        g.coeff.push_back(c);
        for (std::size_t i = 0; i < dim; ++i) g.grad_hidden[i] += c * u[i];
    };
    target(ex.center, 1.0);
    for (auto n : ex.negatives) target(n, 0.0);
}

}  // namespace

void TrainingConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (negative < 0) throw std::invalid_argument("negative must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(initial_lr > 0.0)) throw std::invalid_argument("initial_lr must be > 0");
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    if (!(subsample_t >= 0.0)) throw std::invalid_argument("subsample_t must be >= 0");
}

TrainingConfig personalized_defaults(TrainingConfig base) {
    base.min_count = 1;
    base.strict = false;
    return base;
}

EmbeddingModel::EmbeddingModel(std::vector<VocabEntry> vocab, Matrix input, Matrix output,
                               TrainingConfig config)
    : vocab_(std::move(vocab)), input_(std::move(input)), output_(std::move(output)),
      config_(config) {
    if (input_.rows() != vocab_.size()) throw std::invalid_argument("vocab/vector row mismatch");
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (!lookup_.emplace(vocab_[i].term, i).second) {
            throw std::invalid_argument("duplicate vocabulary term: " + vocab_[i].term);
        }
    }
    norms_.resize(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        auto v = input_.row(i);
        norms_[i] = std::sqrt(dot(v, v));
    }
}

std::optional<std::size_t> EmbeddingModel::find(const std::string& term) const {
    auto it = lookup_.find(term);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> build_training_stream(const DocumentStore& store) {
    std::vector<std::string> stream;
    for (const auto& doc : store.documents()) {
        auto tokens = tokenize(doc.content);
        stream.insert(stream.end(), std::make_move_iterator(tokens.begin()),
                      std::make_move_iterator(tokens.end()));
    }
    return stream;
}

std::vector<std::string> build_training_stream(const ProfileDocument& profile) {
    return tokenize(profile.text);
}

std::vector<VocabEntry> build_vocab(std::span<const std::string> stream, int min_count) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& t : stream) ++counts[t];
    std::vector<VocabEntry> vocab;
    for (auto& [term, n] : counts) {
        if (n >= static_cast<std::uint64_t>(min_count)) vocab.push_back({term, n});
    }
    std::stable_sort(vocab.begin(), vocab.end(),
                     [](const VocabEntry& a, const VocabEntry& b) { return a.count > b.count; });
    return vocab;
}

double cbow_ns_loss(const Matrix& input, const Matrix& output, const CbowExample& ex) {
    ExampleGrad g;
    forward_backward(input, output, ex, g);
    return g.loss;
}

double cbow_ns_gradient(const Matrix& input, const Matrix& output, const CbowExample& ex,
                        Matrix& grad_input, Matrix& grad_output) {
    ExampleGrad g;
    forward_backward(input, output, ex, g);
    if (ex.context.empty()) return g.loss;
    const std::size_t dim = input.cols();
    const double inv = 1.0 / static_cast<double>(ex.context.size());
    for (auto c : ex.context) {
        auto row = grad_input.row(c);
        for (std::size_t i = 0; i < dim; ++i) row[i] += g.grad_hidden[i] * inv;
    }
    auto add_output = [&](std::uint32_t r, double coeff) {
        auto row = grad_output.row(r);
        for (std::size_t i = 0; i < dim; ++i) row[i] += coeff * g.hidden[i];
    };
    add_output(ex.center, g.coeff[0]);
    for (std::size_t n = 0; n < ex.negatives.size(); ++n) add_output(ex.negatives[n], g.coeff[n + 1]);
    return g.loss;
}

double cbow_ns_sgd_step(Matrix& input, Matrix& output, const CbowExample& ex, double lr) {
    thread_local ExampleGrad g;
    forward_backward(input, output, ex, g);
    if (ex.context.empty()) return g.loss;
    const std::size_t dim = input.cols();
    auto step_output = [&](std::uint32_t r, double coeff) {
        auto row = output.row(r);
        for (std::size_t i = 0; i < dim; ++i) row[i] -= lr * coeff * g.hidden[i];
    };
    step_output(ex.center, g.coeff[0]);
    for (std::size_t n = 0; n < ex.negatives.size(); ++n) step_output(ex.negatives[n], g.coeff[n + 1]);
    const double scale = lr / static_cast<double>(ex.context.size());
    for (auto c : ex.context) {
        auto row = input.row(c);
        for (std::size_t i = 0; i < dim; ++i) row[i] -= scale * g.grad_hidden[i];
    }
    return g.loss;
}

namespace {

// Portable draws from mt19937_64: identical sequences on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
    std::mt19937_64 engine_;
};

// Unigram distribution raised to the 3/4 power, sampled by inverse CDF.
class NoiseSampler {
public:
    explicit NoiseSampler(const std::vector<VocabEntry>& vocab) {
        cdf_.reserve(vocab.size());
        double acc = 0.0;
        for (const auto& v : vocab) {
            acc += std::pow(static_cast<double>(v.count), 0.75);
            cdf_.push_back(acc);
        }
        for (auto& c : cdf_) c /= acc;
        cdf_.back() = 1.0;
    }

    std::uint32_t draw(Rng& rng) const {
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), rng.uniform());
        if (it == cdf_.end()) --it;
        return static_cast<std::uint32_t>(it - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

}  // namespace

EmbeddingModel train(std::span<const std::string> stream, const TrainingConfig& cfg) {
    cfg.validate();
    auto vocab = build_vocab(stream, cfg.min_count);
    if (vocab.empty()) throw TrainingError("training stream has no term with count >= min_count");

    std::unordered_map<std::string, std::uint32_t> ids;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) ids.emplace(vocab[i].term, i);
    std::vector<std::uint32_t> corpus;
    corpus.reserve(stream.size());
    for (const auto& t : stream) {
        if (auto it = ids.find(t); it != ids.end()) corpus.push_back(it->second);
    }

    bool undertrained = stream.size() < cfg.min_corpus_tokens;
    if (undertrained && cfg.strict) {
        throw TrainingError("training stream has " + std::to_string(stream.size()) +
                            " tokens, below min_corpus_tokens=" +
                            std::to_string(cfg.min_corpus_tokens));
    }

    const std::size_t dim = static_cast<std::size_t>(cfg.dim);
    Rng rng(cfg.seed);
    Matrix input(vocab.size(), dim);
    Matrix output(vocab.size(), dim);
    for (auto& x : input.data()) x = (rng.uniform() - 0.5) / static_cast<double>(dim);

    std::vector<double> keep_prob(vocab.size(), 1.0);
    if (cfg.subsample_t > 0.0) {
        const double threshold = cfg.subsample_t * static_cast<double>(corpus.size());
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            double f = static_cast<double>(vocab[i].count);
            keep_prob[i] = (std::sqrt(f / threshold) + 1.0) * threshold / f;
        }
    }

    NoiseSampler noise(vocab);
    const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(corpus.size());
    const double min_lr = cfg.initial_lr * 1e-4;

    std::vector<std::uint32_t> kept;
    std::vector<std::size_t> kept_pos;
    std::vector<std::uint32_t> context;
    std::vector<std::uint32_t> negatives;
    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        kept.clear();
        kept_pos.clear();
        for (std::size_t p = 0; p < corpus.size(); ++p) {
            if (keep_prob[corpus[p]] < 1.0 && keep_prob[corpus[p]] < rng.uniform()) continue;
            kept.push_back(corpus[p]);
            kept_pos.push_back(p);
        }

        double loss_sum = 0.0;
        std::size_t examples = 0;
        for (std::size_t p = 0; p < kept.size(); ++p) {
            double progress =
                (static_cast<double>(epoch) * static_cast<double>(corpus.size()) +
                 static_cast<double>(kept_pos[p])) / total_steps;
            double lr = std::max(min_lr, cfg.initial_lr * (1.0 - progress));

            auto reach = static_cast<std::size_t>(cfg.window) - rng.below(static_cast<std::uint64_t>(cfg.window));
            context.clear();
            std::size_t lo = p >= reach ? p - reach : 0;
            std::size_t hi = std::min(kept.size() - 1, p + reach);
            for (std::size_t q = lo; q <= hi; ++q) {
                if (q != p) context.push_back(kept[q]);
            }
            if (context.empty()) continue;

            negatives.clear();
            for (int n = 0; n < cfg.negative; ++n) {
                auto draw = noise.draw(rng);
                if (draw != kept[p]) negatives.push_back(draw);
            }
            loss_sum += cbow_ns_sgd_step(input, output, {context, kept[p], negatives}, lr);
            ++examples;
        }
        epoch_losses.push_back(examples ? loss_sum / static_cast<double>(examples) : 0.0);
    }

    for (double x : input.data()) {
        if (!std::isfinite(x)) throw TrainingError("training diverged: non-finite input vector");
    }
    for (double x : output.data()) {
        if (!std::isfinite(x)) throw TrainingError("training diverged: non-finite output vector");
    }

    EmbeddingModel model(std::move(vocab), std::move(input), std::move(output), cfg);
    model.set_undertrained(undertrained);
    model.set_epoch_losses(std::move(epoch_losses));
    model.set_training_tokens(stream.size());
    return model;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
    double na = std::sqrt(dot(a, a));
    double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, const std::string& term,
                                        std::size_t k, const std::set<std::string>& exclude) {
    auto id = model.find(term);
    if (!id || k == 0 || model.norm(*id) == 0.0) return {};
    auto query = model.vector(*id);
    const double qnorm = model.norm(*id);

    std::vector<Neighbor> candidates;
    candidates.reserve(model.vocab_size());
    for (std::size_t i = 0; i < model.vocab_size(); ++i) {
        if (i == *id || model.norm(i) == 0.0) continue;
        const auto& cand = model.vocab()[i].term;
        if (exclude.contains(cand)) continue;
        double sim = std::clamp(dot(query, model.vector(i)) / (qnorm * model.norm(i)), -1.0, 1.0);
        candidates.push_back({cand, sim});
    }
    auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.term < b.term;
    };
    std::size_t keep = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    candidates.resize(keep);
    return candidates;
}

void save_model(const EmbeddingModel& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write model: " + path.string());
    os << model.vocab_size() << ' ' << model.dim() << '\n';
    char buf[32];
    for (std::size_t i = 0; i < model.vocab_size(); ++i) {
        os << model.vocab()[i].term;
        for (double x : model.vector(i)) {
            std::snprintf(buf, sizeof buf, " %.10g", x);
            os << buf;
        }
        os << '\n';
    }
}

EmbeddingModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model: " + path.string());
    const std::string source = path.string();
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
    std::istringstream header(line);
    long long rows = -1, dim = -1;
    std::string extra;
    if (!(header >> rows >> dim) || (header >> extra) || rows < 0 || dim < 1) {
        throw ParseError(source, 1, "header must be `vocab_size dim`");
    }

    std::vector<VocabEntry> vocab;
    Matrix input(static_cast<std::size_t>(rows), static_cast<std::size_t>(dim));
    for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r) {
        ++line_no;
        if (!std::getline(in, line)) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(rows) + " rows, found " + std::to_string(r));
        }
        auto fields = tokenize(line);
        if (fields.size() != static_cast<std::size_t>(dim) + 1) {
            throw ParseError(source, line_no,
                             "row has " + std::to_string(fields.empty() ? 0 : fields.size() - 1) +
                                 " values, header says " + std::to_string(dim));
        }
        vocab.push_back({fields[0], 0});
        for (std::size_t c = 0; c < static_cast<std::size_t>(dim); ++c) {
            const auto& f = fields[c + 1];
            char* end = nullptr;
            double v = std::strtod(f.c_str(), &end);
            if (end != f.c_str() + f.size() || !std::isfinite(v)) {
                throw ParseError(source, line_no, "bad vector value `" + f + "`");
            }
            input.at(r, c) = v;
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            throw ParseError(source, line_no, "more rows than the header declares");
        }
    }
    TrainingConfig cfg;
    cfg.dim = static_cast<int>(dim);
    try {
        return EmbeddingModel(std::move(vocab), std::move(input), Matrix{}, cfg);
    } catch (const std::invalid_argument& e) {
        throw ParseError(source, line_no, e.what());
    }
}

}  // namespace qexp
