#include "mathrel/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "json.hpp"
#include "mathrel/rng.hpp"

namespace mathrel::explain {

TokenGame::TokenGame(const model::Parameters<float>& params,
                     const model::Vocab& vocab, const model::ModelConfig& cfg,
                     std::string_view text)
    : params_(params), cfg_(cfg), source_text_(text) {
    base_input_ = model::encode(text, vocab, cfg.max_len);

    const auto stream = preprocess::preprocess_pipeline(text);
    // positions 1.. hold the surviving tokens ([CLS] is at 0); truncation at
    // max_len applies exactly as in encode()
    for (std::size_t i = 0; i < stream.tokens.size(); ++i) {
        const std::size_t pos = i + 1;
        if (pos >= static_cast<std::size_t>(cfg.max_len)) break;
        positions_.push_back(pos);
        tokens_.push_back(stream.tokens[i]);
        spans_.push_back(stream.spans[i]);
    }
    if (tokens_.size() > 63) {
        throw TooManyTokens("more than 63 maskable tokens");
    }
}

model::EncodedInput TokenGame::masked_input(Coalition s) const {
    model::EncodedInput in = base_input_;
    for (std::size_t i = 0; i < positions_.size(); ++i) {
        if (!(s >> i & 1u)) in.ids[positions_[i]] = model::Vocab::kMask;
    }
    return in;
}

std::array<double, data::kNumClasses> TokenGame::evaluate_batch_one(
    Coalition s) const {
    const auto probs = model::forward_eval({masked_input(s)}, params_, cfg_)[0];
    std::array<double, data::kNumClasses> out{};
    for (int c = 0; c < data::kNumClasses; ++c) {
        out[static_cast<std::size_t>(c)] =
            static_cast<double>(probs[static_cast<std::size_t>(c)]);
    }
    return out;
}

std::array<double, data::kNumClasses> TokenGame::value(Coalition s) const {
    if (cache_enabled_) {
        if (const auto it = cache_.find(s); it != cache_.end()) return it->second;
    }
    const auto v = evaluate_batch_one(s);
    if (cache_enabled_) cache_.emplace(s, v);
    return v;
}

void TokenGame::prime(const std::vector<Coalition>& coalitions) const {
    if (!cache_enabled_) return;
    std::vector<Coalition> todo;
    for (Coalition s : coalitions) {
        if (!cache_.count(s)) {
            cache_.emplace(s, std::array<double, data::kNumClasses>{});
            todo.push_back(s);
        }
    }
    // the placeholder entries above also dedup `coalitions` itself
    constexpr std::size_t kChunk = 128;
    for (std::size_t start = 0; start < todo.size(); start += kChunk) {
        const std::size_t stop = std::min(todo.size(), start + kChunk);
        std::vector<model::EncodedInput> batch;
        batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) {
            batch.push_back(masked_input(todo[i]));
        }
        const auto probs = model::forward_eval(batch, params_, cfg_);
        for (std::size_t i = start; i < stop; ++i) {
            auto& entry = cache_[todo[i]];
            for (int c = 0; c < data::kNumClasses; ++c) {
                entry[static_cast<std::size_t>(c)] = static_cast<double>(
                    probs[i - start][static_cast<std::size_t>(c)]);
            }
        }
    }
}

namespace {

// |S|! (n-|S|-1)! / n! for every coalition size
std::vector<double> exact_weights(std::size_t n) {
    std::vector<double> fact(n + 1, 1.0);
    for (std::size_t i = 1; i <= n; ++i) {
        fact[i] = fact[i - 1] * static_cast<double>(i);
    }
    std::vector<double> w(n);
    for (std::size_t s = 0; s < n; ++s) {
        w[s] = fact[s] * fact[n - 1 - s] / fact[n];
    }
    return w;
}

}  // namespace

ShapleyValues shapley_exact_values(std::size_t n, const CoalitionFn& v,
                                   std::size_t exact_limit) {
    if (n > exact_limit) {
        throw TooManyTokens("token count " + std::to_string(n) +
                            " above exact limit " + std::to_string(exact_limit));
    }
    if (n > 25) throw TooManyTokens("exact enumeration capped at 25 tokens");
    ShapleyValues out;
    out.values.assign(n, 0.0);
    if (n == 0) {
        out.base_value = out.f_full = v(0);
        return out;
    }

    const Coalition full = (Coalition(1) << n) - 1;
    std::vector<double> table(static_cast<std::size_t>(1) << n);
    for (Coalition s = 0; s <= full; ++s) {
        table[s] = v(s);
    }
    out.base_value = table[0];
    out.f_full = table[full];

    const auto weights = exact_weights(n);
    for (Coalition s = 0; s <= full; ++s) {
        const auto size = static_cast<std::size_t>(std::popcount(s));
        if (size >= n) continue;
        const double w = weights[size];
        const double vs = table[s];
        for (std::size_t i = 0; i < n; ++i) {
            if (s >> i & 1u) continue;
            out.values[i] += w * (table[s | (Coalition(1) << i)] - vs);
        }
    }
    return out;
}

namespace {

// Token counts up to this bound use the richer all-prefix estimator; the
// extra coalition lookups stay cache-bounded there.
constexpr std::size_t kInsertionEstimatorLimit = 12;

}  // namespace

ShapleyValues shapley_sampled_values(std::size_t n, const CoalitionFn& v,
                                     int n_permutations, std::uint64_t seed,
                                     bool antithetic) {
    if (n_permutations < 2) {
        throw std::invalid_argument("need at least 2 permutations");
    }
    ShapleyValues out;
    out.values.assign(n, 0.0);
    out.std_error.assign(n, 0.0);
    out.base_value = v(0);
    if (n == 0) {
        out.f_full = out.base_value;
        return out;
    }
    const Coalition full = (Coalition(1) << n) - 1;
    out.f_full = v(full);

    Rng rng(seed);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    const bool insertion =
        n <= kInsertionEstimatorLimit &&
        static_cast<std::size_t>(n_permutations) >= 2 * n;

    // plain walk: one marginal per token per permutation
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    // insertion walk: per (token, prefix-size) stratum, the set of distinct
    // prefixes visited (sampling without replacement within each stratum)
    std::vector<std::set<Coalition>> strata;
    if (insertion) strata.assign(n * n, {});

    const auto walk_plain = [&](const std::vector<std::size_t>& order) {
        Coalition s = 0;
        double prev = out.base_value;
        for (std::size_t i : order) {
            s |= Coalition(1) << i;
            const double cur = (s == full) ? out.f_full : v(s);
            const double marginal = cur - prev;
            sum[i] += marginal;
            sumsq[i] += marginal * marginal;
            prev = cur;
        }
    };

    // Along the prefix chain of one permutation, credit every still-absent
    // token with its marginal against the current prefix. Distinct prefixes
    // per (token, prefix-size) stratum are collected once each.
    const auto walk_insertion = [&](const std::vector<std::size_t>& order) {
        Coalition s = 0;
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                if (s >> i & 1u) continue;
                v(s | (Coalition(1) << i));  // warm the underlying cache
                strata[i * n + k].insert(s);
            }
            s |= Coalition(1) << order[k];
            v(s);
        }
    };

    // Walks come in blocks: every cyclic rotation of a freshly shuffled base
    // permutation, each paired with its reverse. Rotations put every token in
    // every position once per block; the random base keeps prefix subsets
    // uniform within each stratum.
    int done = 0;
    std::vector<std::size_t> rotated(n), reversed(n);
    while (done < n_permutations) {
        rng.shuffle(perm);
        for (std::size_t shift = 0; shift < n && done < n_permutations; ++shift) {
            for (std::size_t i = 0; i < n; ++i) {
                rotated[i] = perm[(i + shift) % n];
            }
            insertion ? walk_insertion(rotated) : walk_plain(rotated);
            ++done;
            if (antithetic && done < n_permutations) {
                std::reverse_copy(rotated.begin(), rotated.end(), reversed.begin());
                insertion ? walk_insertion(reversed) : walk_plain(reversed);
                ++done;
            }
        }
    }

    if (insertion) {
        // binomial coefficients C(n-1, k): stratum population sizes
        std::vector<double> pop(n, 1.0);
        for (std::size_t k = 1; k < n; ++k) {
            pop[k] = pop[k - 1] * static_cast<double>(n - k) / static_cast<double>(k);
        }
        for (std::size_t i = 0; i < n; ++i) {
            double value = 0.0;
            double var = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const auto& subset_set = strata[i * n + k];
                const double c = static_cast<double>(subset_set.size());
                if (c == 0.0) continue;
                // two-pass mean/variance over the sorted subset set
                double s1 = 0.0;
                for (Coalition w : subset_set) {
                    s1 += v(w | (Coalition(1) << i)) - v(w);
                }
                const double mean = s1 / c;
                double s2 = 0.0;
                for (Coalition w : subset_set) {
                    const double d = (v(w | (Coalition(1) << i)) - v(w)) - mean;
                    s2 += d * d;
                }
                value += mean;
                if (c > 1.0) {
                    // without-replacement variance with finite-population correction
                    const double sample_var = s2 / (c - 1.0);
                    const double fpc = std::max(0.0, 1.0 - c / pop[k]);
                    var += fpc * sample_var / c;
                }
            }
            out.values[i] = value / static_cast<double>(n);
            out.std_error[i] = std::sqrt(var) / static_cast<double>(n);
        }
        return out;
    }

    const double count = static_cast<double>(done);
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = sum[i] / count;
        out.values[i] = mean;
        const double var = std::max(
            0.0, (sumsq[i] - count * mean * mean) / std::max(1.0, count - 1.0));
        out.std_error[i] = std::sqrt(var / count);
    }
    return out;
}

double coalition_value(const TokenGame& game, Coalition s,
                       data::RelationLabel target) {
    return game.value(s)[static_cast<std::size_t>(target)];
}

namespace {

Attribution attach_game(const TokenGame& game, data::RelationLabel target,
                        ShapleyValues&& sv, ShapleyMethod method) {
    Attribution a;
    a.tokens = game.tokens();
    a.spans = game.spans();
    a.source_text = game.source_text();
    a.values = std::move(sv.values);
    a.std_error = std::move(sv.std_error);
    a.base_value = sv.base_value;
    a.f_full = sv.f_full;
    a.target_class = target;
    a.method = method;
    return a;
}

void prime_all_coalitions(const TokenGame& game) {
    const std::size_t n = game.n_tokens();
    std::vector<Coalition> all(static_cast<std::size_t>(1) << n);
    for (std::size_t s = 0; s < all.size(); ++s) all[s] = s;
    game.prime(all);
}

}  // namespace

Attribution shapley_exact(const TokenGame& game, data::RelationLabel target,
                          std::size_t exact_limit) {
    const std::size_t n = game.n_tokens();
    if (n > exact_limit) {
        throw TooManyTokens("token count " + std::to_string(n) +
                            " above exact limit " + std::to_string(exact_limit));
    }
    prime_all_coalitions(game);
    ShapleyMethod method;
    method.exact = true;
    return attach_game(
        game, target,
        shapley_exact_values(n, game.value_fn(target), exact_limit), method);
}

Attribution shapley_sampled(const TokenGame& game, data::RelationLabel target,
                            int n_permutations, std::uint64_t seed,
                            bool antithetic) {
    ShapleyMethod method;
    method.exact = false;
    method.n_permutations = n_permutations;
    method.seed = seed;
    method.antithetic = antithetic;
    return attach_game(
        game, target,
        shapley_sampled_values(game.n_tokens(), game.value_fn(target),
                               n_permutations, seed, antithetic),
        method);
}

std::vector<Attribution> explain_all_classes(const TokenGame& game,
                                             const ExplainOptions& opts) {
    std::vector<Attribution> out;
    out.reserve(data::kNumClasses);
    const bool exact = game.n_tokens() <= opts.exact_limit;
    for (auto label : data::all_labels()) {
        if (exact) {
            out.push_back(shapley_exact(game, label, opts.exact_limit));
        } else {
            out.push_back(
                shapley_sampled(game, label, opts.n_permutations, opts.seed, true));
        }
    }
    return out;
}

ClassBarSummary aggregate_bar(data::RelationLabel target,
                              const std::vector<Attribution>& attributions,
                              std::size_t k) {
    if (attributions.empty()) {
        throw EmptyGroup("no attributions for class " +
                         std::string(data::label_name(target)));
    }
    std::map<std::string, std::pair<double, std::size_t>> acc;  // sum, count
    for (const auto& a : attributions) {
        for (std::size_t i = 0; i < a.tokens.size(); ++i) {
            auto& e = acc[a.tokens[i]];
            e.first += std::abs(a.values[i]);
            e.second += 1;
        }
    }
    std::vector<std::pair<std::string, double>> means;
    means.reserve(acc.size());
    for (const auto& [token, e] : acc) {
        means.emplace_back(token, e.first / static_cast<double>(e.second));
    }
    std::sort(means.begin(), means.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    ClassBarSummary out;
    out.target_class = target;
    out.n_attributions = attributions.size();
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (i < k) {
            out.top.push_back(means[i]);
        } else {
            out.residual += means[i].second;
        }
    }
    return out;
}

std::string attribution_to_json(const Attribution& a) {
    nlohmann::json j;
    j["target_class"] = std::string(data::label_name(a.target_class));
    j["tokens"] = a.tokens;
    j["values"] = a.values;
    j["base_value"] = a.base_value;
    j["f_full"] = a.f_full;
    if (!a.method.exact) j["std_error"] = a.std_error;
    j["method"] =
        a.method.exact
            ? nlohmann::json{{"kind", "exact"}}
            : nlohmann::json{{"kind", "sampled"},
                             {"n_permutations", a.method.n_permutations},
                             {"seed", a.method.seed},
                             {"antithetic", a.method.antithetic}};
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& s : a.spans) {
        spans.push_back({{"start", s.start}, {"end", s.end}});
    }
    j["spans"] = std::move(spans);
    j["source_text"] = a.source_text;
    return j.dump(1);
}

}  // namespace mathrel::explain
