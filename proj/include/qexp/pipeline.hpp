#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "qexp/config.hpp"
#include "qexp/embed.hpp"
#include "qexp/eval.hpp"
#include "qexp/index.hpp"
#include "qexp/textprep.hpp"

namespace qexp {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitMissingArtifact = 2,
    kExitBadConfig = 3,
};

/// An upstream input or artifact that a command needs is absent.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Effective settings after config file, environment and flags are merged.
struct PipelineSettings {
    std::filesystem::path corpus;
    std::filesystem::path users;
    std::filesystem::path topics;
    std::filesystem::path qrels;
    std::filesystem::path model_dir;
    std::filesystem::path output_dir;
    std::filesystem::path stopwords;
    std::filesystem::path stop_adjectives;

    NormalizationConfig normalization;
    TrainingConfig global_training;
    TrainingConfig user_training;
    ScoringConfig scoring;

    std::size_t k = 5;
    std::size_t top_n = 1000;
    std::vector<ConfId> sweep_confs;
    std::vector<std::string> topic_subset;
    std::string run_tag = "qexp";
    bool refuse_undertrained = true;
    std::uint64_t seed = 1;

    Config source;
};

/// Throws ConfigError for any invalid value.
PipelineSettings resolve_settings(const Config& cfg);

/// Seed for a user's model, derived from the global seed.
std::uint64_t user_seed(std::uint64_t seed, const std::string& user_id);

/// Runs one command line (args[0] is the program name) and returns its exit
/// code. Messages go to `out`; a one-line reason goes to `err` on failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qexp
