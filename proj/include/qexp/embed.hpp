#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qexp/corpus.hpp"

namespace qexp {

struct TrainingConfig {
    int dim = 500;
    int window = 8;
    int negative = 25;
    int epochs = 5;
    double initial_lr = 0.05;
    int min_count = 5;
    double subsample_t = 1e-4;
    std::uint64_t seed = 1;
    /// Streams shorter than this are rejected in strict mode and produce a
    /// model flagged as undertrained otherwise.
    std::size_t min_corpus_tokens = 1000;
    bool strict = true;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Defaults for per-user training: min_count 1 and permissive mode.
TrainingConfig personalized_defaults(TrainingConfig base = {});

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major |rows| x dim matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct VocabEntry {
    std::string term;
    std::uint64_t count = 0;
    bool operator==(const VocabEntry&) const = default;
};

struct Neighbor {
    std::string term;
    double similarity = 0.0;
};

class EmbeddingModel {
public:
    EmbeddingModel() = default;
    /// `output` may be empty (models read back from the text format carry
    /// word vectors only).
    EmbeddingModel(std::vector<VocabEntry> vocab, Matrix input, Matrix output, TrainingConfig config);

    std::size_t vocab_size() const { return vocab_.size(); }
    std::size_t dim() const { return input_.cols(); }
    const std::vector<VocabEntry>& vocab() const { return vocab_; }
    std::optional<std::size_t> find(const std::string& term) const;

    const Matrix& input_vectors() const { return input_; }
    const Matrix& output_vectors() const { return output_; }
    std::span<const double> vector(std::size_t id) const { return input_.row(id); }
    double norm(std::size_t id) const { return norms_[id]; }

    const TrainingConfig& config() const { return config_; }

    /// Set when the training stream was shorter than min_corpus_tokens.
    bool undertrained() const { return undertrained_; }
    void set_undertrained(bool flag) { undertrained_ = flag; }

    /// Mean per-example loss of each epoch, in order.
    const std::vector<double>& epoch_losses() const { return epoch_losses_; }
    void set_epoch_losses(std::vector<double> losses) { epoch_losses_ = std::move(losses); }

    std::size_t training_tokens() const { return training_tokens_; }
    void set_training_tokens(std::size_t n) { training_tokens_ = n; }

private:
    std::vector<VocabEntry> vocab_;
    std::unordered_map<std::string, std::size_t> lookup_;
    Matrix input_;
    Matrix output_;
    std::vector<double> norms_;
    TrainingConfig config_;
    bool undertrained_ = false;
    std::vector<double> epoch_losses_;
    std::size_t training_tokens_ = 0;
};

/// All document content in store order, tokenized. No stemming, no stopping.
std::vector<std::string> build_training_stream(const DocumentStore& store);
std::vector<std::string> build_training_stream(const ProfileDocument& profile);

/// Vocabulary of terms with count >= min_count, sorted by count desc then term.
std::vector<VocabEntry> build_vocab(std::span<const std::string> stream, int min_count);

/// One CBOW training example: the mean of the context rows of the input
/// matrix predicts `center` against the `negatives` rows of the output matrix.
struct CbowExample {
    std::span<const std::uint32_t> context;
    std::uint32_t center = 0;
    std::span<const std::uint32_t> negatives;
};

/// -log s(u_c . h) - sum_n log s(-u_n . h), h = mean of context input rows.
double cbow_ns_loss(const Matrix& input, const Matrix& output, const CbowExample& ex);

/// Loss of `ex`; adds dLoss/dInput and dLoss/dOutput into the gradient
/// matrices (which must match the parameter shapes).
double cbow_ns_gradient(const Matrix& input, const Matrix& output, const CbowExample& ex,
                        Matrix& grad_input, Matrix& grad_output);

/// One SGD step on `ex` with learning rate `lr`. Returns the pre-step loss.
double cbow_ns_sgd_step(Matrix& input, Matrix& output, const CbowExample& ex, double lr);

/// Trains CBOW with negative sampling. Deterministic for a fixed seed.
/// Throws TrainingError for an empty vocabulary, or in strict mode for a
/// stream shorter than min_corpus_tokens.
EmbeddingModel train(std::span<const std::string> stream, const TrainingConfig& cfg);

/// Throws std::invalid_argument for mismatched dims or a zero vector.
double cosine(std::span<const double> a, std::span<const double> b);

/// The k vocabulary terms most cosine-similar to `term`, excluding the term
/// itself, the `exclude` set and zero vectors. Ties break lexicographically.
/// Empty for out-of-vocabulary terms.
std::vector<Neighbor> nearest_neighbors(const EmbeddingModel& model, const std::string& term,
                                        std::size_t k, const std::set<std::string>& exclude = {});

/// word2vec text format: `vocab_size dim` header, then `term v_1 ... v_dim`.
void save_model(const EmbeddingModel& model, const std::filesystem::path& path);
/// Throws ParseError carrying the offending line number.
EmbeddingModel load_model(const std::filesystem::path& path);

}  // namespace qexp
