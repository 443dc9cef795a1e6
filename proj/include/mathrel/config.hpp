#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mathrel/data.hpp"
#include "mathrel/explain.hpp"
#include "mathrel/model.hpp"

namespace mathrel::config {

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string field_, const std::string& what)
        : std::runtime_error(field_ + ": " + what), field(std::move(field_)) {}
};

struct GeneratorConfig {
    std::size_t n = 3284;
    std::uint64_t seed = 7;
    data::ClassFractions distribution = data::default_class_distribution();
};

struct ExplainConfig {
    std::size_t exact_limit = explain::kDefaultExactLimit;
    int n_permutations = 2000;
    std::size_t top_k = 10;
    std::uint64_t seed = 0;
    std::vector<std::string> sample_texts;  // empty: drawn from the test split
    std::size_t samples_per_class = 1;
    std::size_t bar_samples_per_class = 8;
};

// Every field has a working default, so an empty config file is valid.
struct RunConfig {
    std::filesystem::path corpus_path = "out/corpus.csv";
    std::filesystem::path output_dir = "out";
    int verbosity = 1;  // 0 silent, 1 per-epoch, 2 per-batch
    GeneratorConfig generator;
    data::SplitSpec split{0.8, 13};
    model::ModelConfig model;
    model::TrainConfig train;
    ExplainConfig explain;

    void validate() const;
};

RunConfig default_config();

// Parses the JSON config file, applying defaults for absent fields and the
// MATHREL_SEED environment variable for absent seeds. Unknown keys and
// invalid values raise ConfigError with the offending field path.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace mathrel::config
