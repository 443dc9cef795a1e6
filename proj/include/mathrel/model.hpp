#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mathrel/data.hpp"
#include "mathrel/encoder.hpp"

namespace mathrel::model {

struct EmptyCorpus : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Word-level vocabulary with fixed reserved ids.
struct Vocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kMask = 3;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int id_of(const std::string& token) const {
        const auto it = token_to_id.find(token);
        return it == token_to_id.end() ? kUnk : it->second;
    }
};

struct TrainConfig {
    double learning_rate = 2e-4;
    int batch_size = 12;
    int epochs = 40;
    std::uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
    int early_stop_patience = 0;  // 0 disables early stopping

    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    }
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

// Vocabulary from the training split only: reserved tokens, then preprocessed
// train tokens ordered by (frequency desc, token asc).
Vocab build_vocab(const data::Corpus& train_corpus);

// [CLS] + token ids, truncated to max_len, PAD-filled; mask 1 on real tokens;
// single-sentence task, so all segment ids are 0.
EncodedInput encode(std::string_view text, const Vocab& vocab, int max_len);

// Eval-mode class probabilities for a batch (no dropout).
std::vector<std::array<float, data::kNumClasses>> forward_eval(
    const std::vector<EncodedInput>& batch, const Parameters<float>& params,
    const ModelConfig& cfg);

using EpochCallback = std::function<void(const EpochStats&)>;
// (epoch, batch index within epoch, batch mean loss)
using BatchCallback = std::function<void(int, std::size_t, double)>;

// Cross-entropy training with AdamW (decoupled decay; biases and layer norms
// exempt), seeded per-epoch shuffling.
std::pair<Parameters<float>, TrainHistory> train(
    const data::Corpus& train_corpus, const data::Corpus& val_corpus,
    const Vocab& vocab, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
    const EpochCallback& on_epoch = nullptr,
    const BatchCallback& on_batch = nullptr);

std::pair<data::RelationLabel, std::array<double, data::kNumClasses>> predict(
    std::string_view text, const Parameters<float>& params, const Vocab& vocab,
    const ModelConfig& cfg);

// Central finite differences against the analytic gradients, in double
// precision, over >= samples_per_group scalars from every parameter tensor.
// Returns the maximum relative error.
double gradient_check(Parameters<double>& params, const ModelConfig& cfg,
                      const std::vector<EncodedInput>& batch,
                      const std::vector<int>& labels, int samples_per_group,
                      std::uint64_t seed);

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const Parameters<float>& params, const ModelConfig& cfg,
                     const Vocab& vocab, const std::filesystem::path& path);

struct Checkpoint {
    Parameters<float> params;
    ModelConfig config;
    Vocab vocab;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string history_to_csv(const TrainHistory& history);

}  // namespace mathrel::model
