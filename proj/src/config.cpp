#include "mathrel/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>

#include "json.hpp"

namespace mathrel::config {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::string& path,
                 const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError(path.empty() ? key : path + "." + key,
                              "unknown configuration key");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception&) {
        throw ConfigError(path + key, "invalid value '" + j.at(key).dump() + "'");
    }
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("MATHREL_SEED");
    if (!raw || !*raw) return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (end == raw || *end != '\0') {
        throw ConfigError("MATHREL_SEED", "must be a non-negative integer");
    }
    return static_cast<std::uint64_t>(v);
}

}  // namespace

void RunConfig::validate() const {
    if (verbosity < 0 || verbosity > 2) {
        throw ConfigError("verbosity", "must be 0, 1, or 2");
    }
    if (generator.n < static_cast<std::size_t>(data::kNumClasses)) {
        throw ConfigError("generator.n", "must be at least 6");
    }
    double sum = 0.0;
    for (double f : generator.distribution) {
        if (f < 0.0) throw ConfigError("generator.distribution", "negative fraction");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("generator.distribution", "fractions must sum to 1");
    }
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
        throw ConfigError("split.train_fraction", "must be in (0,1)");
    }
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    if (train.learning_rate <= 0.0) {
        throw ConfigError("train.learning_rate", "must be positive");
    }
    if (train.batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (train.epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    if (explain.exact_limit > 20) {
        throw ConfigError("explain.exact_limit", "enumeration capped at 20 tokens");
    }
    if (explain.n_permutations < 2) {
        throw ConfigError("explain.n_permutations", "must be >= 2");
    }
}

RunConfig default_config() {
    RunConfig cfg;
    // desk-scale default; larger epoch budgets stay reachable through the
    // config file
    cfg.train.epochs = 10;
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig cfg = default_config();

    json j;
    if (!path.empty()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("config", "cannot open " + path.string());
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
            content = "{}";
        }
        try {
            j = json::parse(content);
        } catch (const json::exception& e) {
            throw ConfigError("config", std::string("not valid JSON: ") + e.what());
        }
    } else {
        j = json::object();
    }
    if (!j.is_object()) throw ConfigError("config", "top level must be an object");

    expect_keys(j, "", {"corpus_path", "output_dir", "verbosity", "generator",
                        "split", "model", "train", "explain"});

    std::string corpus = cfg.corpus_path.string();
    std::string outdir = cfg.output_dir.string();
    read_field(j, "corpus_path", corpus, "");
    read_field(j, "output_dir", outdir, "");
    cfg.corpus_path = corpus;
    cfg.output_dir = outdir;
    read_field(j, "verbosity", cfg.verbosity, "");

    bool gen_seed_set = false, split_seed_set = false, train_seed_set = false,
         explain_seed_set = false;

    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        expect_keys(g, "generator", {"n", "seed", "distribution"});
        read_field(g, "n", cfg.generator.n, "generator.");
        if (g.contains("seed")) gen_seed_set = true;
        read_field(g, "seed", cfg.generator.seed, "generator.");
        if (g.contains("distribution")) {
            const auto& d = g.at("distribution");
            if (!d.is_object()) {
                throw ConfigError("generator.distribution",
                                  "must map class names to fractions");
            }
            data::ClassFractions fr{};
            for (const auto& [key, value] : d.items()) {
                const auto label = data::label_from_name(key);
                if (!label) {
                    throw ConfigError("generator.distribution." + key,
                                      "unknown relation class");
                }
                try {
                    fr[static_cast<std::size_t>(*label)] = value.get<double>();
                } catch (const json::exception&) {
                    throw ConfigError("generator.distribution." + key,
                                      "invalid fraction");
                }
            }
            cfg.generator.distribution = fr;
        }
    }

    if (j.contains("split")) {
        const auto& s = j.at("split");
        expect_keys(s, "split", {"train_fraction", "seed"});
        read_field(s, "train_fraction", cfg.split.train_fraction, "split.");
        if (s.contains("seed")) split_seed_set = true;
        read_field(s, "seed", cfg.split.seed, "split.");
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        expect_keys(m, "model",
                    {"d_model", "n_layers", "n_heads", "ffn_dim", "max_len",
                     "n_classes", "dropout_rate", "layer_norm_epsilon"});
        read_field(m, "d_model", cfg.model.d_model, "model.");
        read_field(m, "n_layers", cfg.model.n_layers, "model.");
        read_field(m, "n_heads", cfg.model.n_heads, "model.");
        read_field(m, "ffn_dim", cfg.model.ffn_dim, "model.");
        read_field(m, "max_len", cfg.model.max_len, "model.");
        read_field(m, "n_classes", cfg.model.n_classes, "model.");
        read_field(m, "dropout_rate", cfg.model.dropout_rate, "model.");
        read_field(m, "layer_norm_epsilon", cfg.model.layer_norm_epsilon, "model.");
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        expect_keys(t, "train",
                    {"learning_rate", "batch_size", "epochs", "seed", "beta1",
                     "beta2", "epsilon", "weight_decay", "early_stop_patience"});
        read_field(t, "learning_rate", cfg.train.learning_rate, "train.");
        read_field(t, "batch_size", cfg.train.batch_size, "train.");
        read_field(t, "epochs", cfg.train.epochs, "train.");
        if (t.contains("seed")) train_seed_set = true;
        read_field(t, "seed", cfg.train.seed, "train.");
        read_field(t, "beta1", cfg.train.beta1, "train.");
        read_field(t, "beta2", cfg.train.beta2, "train.");
        read_field(t, "epsilon", cfg.train.epsilon, "train.");
        read_field(t, "weight_decay", cfg.train.weight_decay, "train.");
        read_field(t, "early_stop_patience", cfg.train.early_stop_patience,
                   "train.");
    }

    if (j.contains("explain")) {
        const auto& e = j.at("explain");
        expect_keys(e, "explain",
                    {"exact_limit", "n_permutations", "top_k", "seed",
                     "sample_texts", "samples_per_class", "bar_samples_per_class"});
        read_field(e, "exact_limit", cfg.explain.exact_limit, "explain.");
        read_field(e, "n_permutations", cfg.explain.n_permutations, "explain.");
        read_field(e, "top_k", cfg.explain.top_k, "explain.");
        if (e.contains("seed")) explain_seed_set = true;
        read_field(e, "seed", cfg.explain.seed, "explain.");
        read_field(e, "sample_texts", cfg.explain.sample_texts, "explain.");
        read_field(e, "samples_per_class", cfg.explain.samples_per_class,
                   "explain.");
        read_field(e, "bar_samples_per_class", cfg.explain.bar_samples_per_class,
                   "explain.");
    }

    if (const auto seed = env_seed()) {
        if (!gen_seed_set) cfg.generator.seed = *seed;
        if (!split_seed_set) cfg.split.seed = *seed;
        if (!train_seed_set) cfg.train.seed = *seed;
        if (!explain_seed_set) cfg.explain.seed = *seed;
    }

    cfg.validate();
    return cfg;
}

}  // namespace mathrel::config
