#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mathrel/data.hpp"
#include "mathrel/model.hpp"
#include "mathrel/preprocess.hpp"

namespace mathrel::explain {

struct TooManyTokens : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyGroup : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultExactLimit = 15;

// A coalition over n <= 63 tokens: bit i set means token i stays visible.
using Coalition = std::uint64_t;

// v(S) for one target class.
using CoalitionFn = std::function<double(Coalition)>;

// Deterministic value function over the surviving (non-PAD, non-CLS) tokens
// of one text: tokens outside the coalition are replaced by the MASK id;
// positions, CLS, and padding stay untouched. Evaluations return all six
// class probabilities and are cached by coalition.
class TokenGame {
public:
    TokenGame(const model::Parameters<float>& params, const model::Vocab& vocab,
              const model::ModelConfig& cfg, std::string_view text);

    std::size_t n_tokens() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<preprocess::TokenSpan>& spans() const { return spans_; }
    const std::string& source_text() const { return source_text_; }

    std::array<double, data::kNumClasses> value(Coalition s) const;
    // batch-evaluate coalitions not yet cached
    void prime(const std::vector<Coalition>& coalitions) const;

    void set_cache_enabled(bool enabled) { cache_enabled_ = enabled; }

    CoalitionFn value_fn(data::RelationLabel target) const {
        return [this, target](Coalition s) {
            return value(s)[static_cast<std::size_t>(target)];
        };
    }

private:
    const model::Parameters<float>& params_;
    const model::ModelConfig& cfg_;
    model::EncodedInput base_input_;
    std::vector<std::size_t> positions_;  // sequence position per token
    std::vector<std::string> tokens_;
    std::vector<preprocess::TokenSpan> spans_;
    std::string source_text_;
    bool cache_enabled_ = true;
    mutable std::unordered_map<Coalition, std::array<double, data::kNumClasses>> cache_;

    std::array<double, data::kNumClasses> evaluate_batch_one(Coalition s) const;
    model::EncodedInput masked_input(Coalition s) const;
};

struct ShapleyMethod {
    bool exact = true;
    int n_permutations = 0;
    std::uint64_t seed = 0;
    bool antithetic = true;
};

struct Attribution {
    std::vector<std::string> tokens;
    std::vector<preprocess::TokenSpan> spans;  // empty for synthetic games
    std::string source_text;
    std::vector<double> values;
    std::vector<double> std_error;  // sampled mode only
    double base_value = 0.0;
    double f_full = 0.0;
    data::RelationLabel target_class = data::RelationLabel::Addition;
    ShapleyMethod method;
};

// Generic engines over an arbitrary coalition value function (used directly
// by tests on synthetic games).
struct ShapleyValues {
    std::vector<double> values;
    std::vector<double> std_error;
    double base_value = 0.0;
    double f_full = 0.0;
};

// Full enumeration of all 2^n coalitions, each evaluated exactly once.
ShapleyValues shapley_exact_values(std::size_t n, const CoalitionFn& v,
                                   std::size_t exact_limit = kDefaultExactLimit);

// Permutation sampling; antithetic pairing walks each sampled permutation
// forwards and reversed.
ShapleyValues shapley_sampled_values(std::size_t n, const CoalitionFn& v,
                                     int n_permutations, std::uint64_t seed,
                                     bool antithetic = true);

// spec'd operations over a model-backed game
double coalition_value(const TokenGame& game, Coalition s,
                       data::RelationLabel target);

Attribution shapley_exact(const TokenGame& game, data::RelationLabel target,
                          std::size_t exact_limit = kDefaultExactLimit);

Attribution shapley_sampled(const TokenGame& game, data::RelationLabel target,
                            int n_permutations, std::uint64_t seed,
                            bool antithetic = true);

struct ExplainOptions {
    std::size_t exact_limit = kDefaultExactLimit;
    int n_permutations = 2000;
    std::uint64_t seed = 0;
};

// One attribution per relation class over the same token set; exact when the
// token count allows, sampled otherwise.
std::vector<Attribution> explain_all_classes(const TokenGame& game,
                                             const ExplainOptions& opts);

struct ClassBarSummary {
    data::RelationLabel target_class = data::RelationLabel::Addition;
    std::vector<std::pair<std::string, double>> top;  // token, mean |value|
    double residual = 0.0;  // summed mean |value| of the remaining tokens
    std::size_t n_attributions = 0;
};

// Per-class mean |value| per distinct token, top-k plus residual. Classes
// with no attributions raise EmptyGroup.
ClassBarSummary aggregate_bar(data::RelationLabel target,
                              const std::vector<Attribution>& attributions,
                              std::size_t k);

std::string attribution_to_json(const Attribution& a);

}  // namespace mathrel::explain
