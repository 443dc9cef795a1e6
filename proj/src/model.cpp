#include "mathrel/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mathrel/preprocess.hpp"

namespace mathrel::model {

namespace {

constexpr std::array<const char*, 4> kReservedTokens = {"[PAD]", "[UNK]",
                                                        "[CLS]", "[MASK]"};

std::vector<std::string> tokens_of(std::string_view text) {
    return preprocess::preprocess_pipeline(text).tokens;
}

}  // namespace

Vocab build_vocab(const data::Corpus& train_corpus) {
    if (train_corpus.empty()) throw EmptyCorpus("cannot build vocab from empty corpus");

    std::unordered_map<std::string, std::int64_t> freq;
    for (const auto& s : train_corpus.statements) {
        for (const auto& t : tokens_of(s.text)) ++freq[t];
    }

    std::vector<std::pair<std::string, std::int64_t>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab vocab;
    for (const char* r : kReservedTokens) vocab.id_to_token.emplace_back(r);
    for (auto& [token, count] : items) {
        vocab.id_to_token.push_back(token);
    }
    for (std::size_t i = 0; i < vocab.id_to_token.size(); ++i) {
        vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);
    }
    return vocab;
}

EncodedInput encode(std::string_view text, const Vocab& vocab, int max_len) {
    if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
    EncodedInput in;
    const auto len = static_cast<std::size_t>(max_len);
    in.ids.assign(len, Vocab::kPad);
    in.attention_mask.assign(len, 0);
    in.segment_ids.assign(len, 0);

    in.ids[0] = Vocab::kCls;
    in.attention_mask[0] = 1;
    std::size_t pos = 1;
    for (const auto& t : tokens_of(text)) {
        if (pos >= len) break;
        in.ids[pos] = vocab.id_of(t);
        in.attention_mask[pos] = 1;
        ++pos;
    }
    return in;
}

std::vector<std::array<float, data::kNumClasses>> forward_eval(
    const std::vector<EncodedInput>& batch, const Parameters<float>& params,
    const ModelConfig& cfg) {
    return run_batch<float>(cfg, params, batch, RunMode::Eval, nullptr, nullptr,
                            nullptr)
        .probs;
}

namespace {

// AdamW state per tensor, in parameter order.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};

void adamw_step(Parameters<float>& params, Parameters<float>& grads,
                AdamState& state, const TrainConfig& cfg) {
    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(grads);
    if (state.m.empty()) {
        state.m.resize(prefs.size());
        state.v.resize(prefs.size());
        for (std::size_t i = 0; i < prefs.size(); ++i) {
            state.m[i].assign(prefs[i].tensor->size(), 0.0);
            state.v[i].assign(prefs[i].tensor->size(), 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < prefs.size(); ++i) {
        auto& w = prefs[i].tensor->v;
        auto& gv = grefs[i].tensor->v;
        auto& m = state.m[i];
        auto& v = state.v[i];
        const double decay = prefs[i].decay ? cfg.weight_decay : 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double g = static_cast<double>(gv[j]);
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            const double update = mh / (std::sqrt(vh) + cfg.epsilon) +
                                  decay * static_cast<double>(w[j]);
            w[j] = static_cast<float>(static_cast<double>(w[j]) -
                                      cfg.learning_rate * update);
        }
    }
}

struct EncodedSet {
    std::vector<EncodedInput> inputs;
    std::vector<int> labels;
};

EncodedSet encode_corpus(const data::Corpus& corpus, const Vocab& vocab,
                         int max_len) {
    EncodedSet set;
    set.inputs.reserve(corpus.size());
    set.labels.reserve(corpus.size());
    for (const auto& s : corpus.statements) {
        set.inputs.push_back(encode(s.text, vocab, max_len));
        set.labels.push_back(static_cast<int>(s.relation));
    }
    return set;
}

void zero_grads(Parameters<float>& grads) {
    for (auto& ref : tensor_refs(grads)) ref.tensor->zero();
}

}  // namespace

std::pair<Parameters<float>, TrainHistory> train(
    const data::Corpus& train_corpus, const data::Corpus& val_corpus,
    const Vocab& vocab, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
    const EpochCallback& on_epoch, const BatchCallback& on_batch) {
    model_cfg.validate();
    train_cfg.validate();
    if (train_corpus.empty() || val_corpus.empty()) {
        throw EmptyCorpus("train and validation corpora must be non-empty");
    }

    const EncodedSet train_set = encode_corpus(train_corpus, vocab, model_cfg.max_len);
    const EncodedSet val_set = encode_corpus(val_corpus, vocab, model_cfg.max_len);

    Parameters<float> params = init_parameters<float>(model_cfg, vocab.size(),
                                                      train_cfg.seed);
    Parameters<float> grads = zero_parameters<float>(model_cfg, vocab.size());
    AdamState adam;
    Rng shuffle_rng(train_cfg.seed);
    Rng dropout_rng(train_cfg.seed + 0x9E3779B9u);

    std::vector<std::size_t> order(train_set.inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainHistory history;
    double best_val_acc = -1.0;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        const auto bs = static_cast<std::size_t>(train_cfg.batch_size);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            std::vector<EncodedInput> batch;
            std::vector<int> labels;
            batch.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                batch.push_back(train_set.inputs[order[i]]);
                labels.push_back(train_set.labels[order[i]]);
            }
            zero_grads(grads);
            const auto res = run_batch<float>(model_cfg, params, batch,
                                              RunMode::Train, &dropout_rng,
                                              &labels, &grads);
            if (!std::isfinite(res.loss)) {
                throw DivergenceError("training loss became non-finite at epoch " +
                                      std::to_string(epoch));
            }
            adamw_step(params, grads, adam, train_cfg);
            if (on_batch) on_batch(epoch, start / bs, res.loss);
            loss_sum += res.loss * static_cast<double>(batch.size());
            seen += batch.size();
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(seen);

        // validation
        double val_loss_sum = 0.0;
        std::size_t correct = 0;
        const std::size_t vbs = 64;
        for (std::size_t start = 0; start < val_set.inputs.size(); start += vbs) {
            const std::size_t stop = std::min(val_set.inputs.size(), start + vbs);
            std::vector<EncodedInput> batch(val_set.inputs.begin() + static_cast<std::ptrdiff_t>(start),
                                            val_set.inputs.begin() + static_cast<std::ptrdiff_t>(stop));
            std::vector<int> labels(val_set.labels.begin() + static_cast<std::ptrdiff_t>(start),
                                    val_set.labels.begin() + static_cast<std::ptrdiff_t>(stop));
            const auto res = run_batch<float>(model_cfg, params, batch,
                                              RunMode::Eval, nullptr, &labels,
                                              nullptr);
            val_loss_sum += res.loss * static_cast<double>(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i) {
                int arg = 0;
                for (int c = 1; c < data::kNumClasses; ++c) {
                    if (res.probs[i][static_cast<std::size_t>(c)] >
                        res.probs[i][static_cast<std::size_t>(arg)]) {
                        arg = c;
                    }
                }
                if (arg == labels[i]) ++correct;
            }
        }
        stats.val_loss = val_loss_sum / static_cast<double>(val_set.inputs.size());
        stats.val_accuracy =
            static_cast<double>(correct) / static_cast<double>(val_set.inputs.size());
        history.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (train_cfg.early_stop_patience > 0) {
            if (stats.val_accuracy > best_val_acc) {
                best_val_acc = stats.val_accuracy;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= train_cfg.early_stop_patience) {
                break;
            }
        }
    }
    return {std::move(params), std::move(history)};
}

std::pair<data::RelationLabel, std::array<double, data::kNumClasses>> predict(
    std::string_view text, const Parameters<float>& params, const Vocab& vocab,
    const ModelConfig& cfg) {
    const auto probs =
        forward_eval({encode(text, vocab, cfg.max_len)}, params, cfg)[0];
    std::array<double, data::kNumClasses> out{};
    int arg = 0;
    for (int c = 0; c < data::kNumClasses; ++c) {
        out[static_cast<std::size_t>(c)] = static_cast<double>(probs[static_cast<std::size_t>(c)]);
        // ties break toward the lowest class code
        if (out[static_cast<std::size_t>(c)] > out[static_cast<std::size_t>(arg)]) arg = c;
    }
    return {static_cast<data::RelationLabel>(arg), out};
}

double gradient_check(Parameters<double>& params, const ModelConfig& cfg,
                      const std::vector<EncodedInput>& batch,
                      const std::vector<int>& labels, int samples_per_group,
                      std::uint64_t seed) {
    Parameters<double> grads = zero_parameters<double>(cfg, static_cast<int>(params.tok_emb.rows));
    const auto loss_of = [&]() {
        return run_batch<double>(cfg, params, batch, RunMode::Eval, nullptr,
                                 &labels, nullptr)
            .loss;
    };
    run_batch<double>(cfg, params, batch, RunMode::Eval, nullptr, &labels, &grads);

    Rng rng(seed);
    const double h = 1e-5;
    double max_rel = 0.0;

    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(grads);
    for (std::size_t gi = 0; gi < prefs.size(); ++gi) {
        auto& w = prefs[gi].tensor->v;
        const auto& gv = grefs[gi].tensor->v;
        const std::size_t n = w.size();
        const std::size_t samples =
            std::min<std::size_t>(n, static_cast<std::size_t>(samples_per_group));
        std::set<std::size_t> picked;
        while (picked.size() < samples) {
            picked.insert(static_cast<std::size_t>(rng.uniform_below(n)));
        }
        for (std::size_t idx : picked) {
            const double orig = w[idx];
            w[idx] = orig + h;
            const double lp = loss_of();
            w[idx] = orig - h;
            const double lm = loss_of();
            w[idx] = orig;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = gv[idx];
            const double denom =
                std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
        }
    }
    return max_rel;
}

namespace {

nlohmann::json tensor_to_json(const Tensor<float>& t) {
    nlohmann::json j;
    j["shape"] = {t.rows, t.cols};
    j["data"] = std::vector<double>(t.v.begin(), t.v.end());
    return j;
}

Tensor<float> tensor_from_json(const nlohmann::json& j) {
    if (!j.contains("shape") || !j.contains("data")) {
        throw FormatError("tensor entry missing shape or data");
    }
    const auto shape = j.at("shape");
    if (!shape.is_array() || shape.size() != 2) {
        throw FormatError("tensor shape must have two dimensions");
    }
    Tensor<float> t(shape[0].get<std::size_t>(), shape[1].get<std::size_t>());
    const auto& data = j.at("data");
    if (!data.is_array() || data.size() != t.size()) {
        throw FormatError("tensor data length mismatch");
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.v[i] = static_cast<float>(data[i].get<double>());
    }
    return t;
}

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"d_model", cfg.d_model},
            {"n_layers", cfg.n_layers},
            {"n_heads", cfg.n_heads},
            {"ffn_dim", cfg.ffn_dim},
            {"max_len", cfg.max_len},
            {"n_classes", cfg.n_classes},
            {"dropout_rate", cfg.dropout_rate},
            {"layer_norm_epsilon", cfg.layer_norm_epsilon}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    try {
        cfg.d_model = j.at("d_model").get<int>();
        cfg.n_layers = j.at("n_layers").get<int>();
        cfg.n_heads = j.at("n_heads").get<int>();
        cfg.ffn_dim = j.at("ffn_dim").get<int>();
        cfg.max_len = j.at("max_len").get<int>();
        cfg.n_classes = j.at("n_classes").get<int>();
        cfg.dropout_rate = j.at("dropout_rate").get<double>();
        cfg.layer_norm_epsilon = j.at("layer_norm_epsilon").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad model_config: ") + e.what());
    }
    return cfg;
}

}  // namespace

void save_checkpoint(const Parameters<float>& params, const ModelConfig& cfg,
                     const Vocab& vocab, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["model_config"] = config_to_json(cfg);
    j["vocab"] = vocab.id_to_token;
    nlohmann::json tensors;
    auto& p = const_cast<Parameters<float>&>(params);
    for (const auto& ref : tensor_refs(p)) {
        tensors[ref.name] = tensor_to_json(*ref.tensor);
    }
    j["tensors"] = std::move(tensors);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (!j.contains("format_version")) throw FormatError("missing format_version");
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
        throw VersionError("unsupported checkpoint format_version " +
                           j.at("format_version").dump());
    }
    if (!j.contains("model_config") || !j.contains("vocab") || !j.contains("tensors")) {
        throw FormatError("checkpoint missing required sections");
    }

    Checkpoint ck;
    ck.config = config_from_json(j.at("model_config"));
    ck.config.validate();

    const auto& vj = j.at("vocab");
    if (!vj.is_array() || vj.size() < kReservedTokens.size()) {
        throw FormatError("bad vocab section");
    }
    for (const auto& tok : vj) ck.vocab.id_to_token.push_back(tok.get<std::string>());
    for (std::size_t i = 0; i < kReservedTokens.size(); ++i) {
        if (ck.vocab.id_to_token[i] != kReservedTokens[i]) {
            throw FormatError("reserved vocabulary ids are not in canonical order");
        }
    }
    for (std::size_t i = 0; i < ck.vocab.id_to_token.size(); ++i) {
        ck.vocab.token_to_id[ck.vocab.id_to_token[i]] = static_cast<int>(i);
    }

    ck.params = zero_parameters<float>(ck.config, ck.vocab.size());
    const auto& tensors = j.at("tensors");
    for (auto& ref : tensor_refs(ck.params)) {
        if (!tensors.contains(ref.name)) {
            throw FormatError("checkpoint missing tensor " + ref.name);
        }
        Tensor<float> loaded = tensor_from_json(tensors.at(ref.name));
        if (loaded.rows != ref.tensor->rows || loaded.cols != ref.tensor->cols) {
            throw FormatError("tensor " + ref.name + " has unexpected shape");
        }
        *ref.tensor = std::move(loaded);
    }
    return ck;
}

std::string history_to_csv(const TrainHistory& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,val_accuracy\n";
    out.precision(17);
    for (const auto& e : history) {
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ','
            << e.val_accuracy << '\n';
    }
    return out.str();
}

}  // namespace mathrel::model
