#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mathrel/config.hpp"
#include "mathrel/csv.hpp"
#include "mathrel/data.hpp"
#include "mathrel/explain.hpp"
#include "mathrel/metrics.hpp"
#include "mathrel/model.hpp"
#include "mathrel/render.hpp"

namespace fs = std::filesystem;
using namespace mathrel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidationFailure = 1;
constexpr int kExitUsage = 2;

struct CliState {
    std::string config_path;
    std::string output_dir;   // overrides config when set
    std::string corpus_path;  // overrides config when set
    int verbosity = -1;       // overrides config when >= 0

    config::RunConfig load() const {
        auto cfg = config::load_config(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (!corpus_path.empty()) cfg.corpus_path = corpus_path;
        if (verbosity >= 0) {
            cfg.verbosity = verbosity;
            cfg.validate();
        }
        return cfg;
    }
};

void log(const config::RunConfig& cfg, int level, const std::string& msg) {
    if (cfg.verbosity >= level) std::cerr << msg << '\n';
}

void write_file(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

data::Corpus load_corpus_checked(const config::RunConfig& cfg) {
    if (!fs::exists(cfg.corpus_path)) {
        throw config::ConfigError("corpus_path",
                                  cfg.corpus_path.string() +
                                      " does not exist (run `generate` first?)");
    }
    return data::load_corpus(cfg.corpus_path);
}

model::Checkpoint load_checkpoint_checked(const config::RunConfig& cfg,
                                          const std::string& explicit_path) {
    const fs::path path = explicit_path.empty()
                              ? cfg.output_dir / fs::path("checkpoint.json")
                              : fs::path(explicit_path);
    if (!fs::exists(path)) {
        throw config::ConfigError(
            "checkpoint", path.string() + " does not exist (run `train` first?)");
    }
    return model::load_checkpoint(path);
}

bool color_output() {
    return isatty(fileno(stdout)) != 0 && std::getenv("NO_COLOR") == nullptr;
}

// Batched eval-mode argmax predictions for a whole corpus.
std::vector<data::RelationLabel> predict_corpus(const data::Corpus& corpus,
                                                const model::Checkpoint& ck) {
    std::vector<model::EncodedInput> inputs;
    inputs.reserve(corpus.size());
    for (const auto& s : corpus.statements) {
        inputs.push_back(model::encode(s.text, ck.vocab, ck.config.max_len));
    }
    std::vector<data::RelationLabel> out;
    out.reserve(corpus.size());
    constexpr std::size_t kBatch = 64;
    for (std::size_t start = 0; start < inputs.size(); start += kBatch) {
        const std::size_t stop = std::min(inputs.size(), start + kBatch);
        const std::vector<model::EncodedInput> batch(
            inputs.begin() + static_cast<std::ptrdiff_t>(start),
            inputs.begin() + static_cast<std::ptrdiff_t>(stop));
        const auto probs = model::forward_eval(batch, ck.params, ck.config);
        for (const auto& row : probs) {
            int arg = 0;
            for (int c = 1; c < data::kNumClasses; ++c) {
                if (row[static_cast<std::size_t>(c)] >
                    row[static_cast<std::size_t>(arg)]) {
                    arg = c;
                }
            }
            out.push_back(static_cast<data::RelationLabel>(arg));
        }
    }
    return out;
}

int cmd_generate(const CliState& state, std::size_t n_override,
                 std::uint64_t seed_override, bool n_set, bool seed_set,
                 const std::string& out_file) {
    auto cfg = state.load();
    auto gen = cfg.generator;
    if (n_set) gen.n = n_override;
    if (seed_set) gen.seed = seed_override;
    const fs::path out_path = out_file.empty() ? cfg.corpus_path : fs::path(out_file);

    const auto corpus = data::generate_synthetic(gen.n, gen.distribution, gen.seed);
    if (!out_path.parent_path().empty()) fs::create_directories(out_path.parent_path());
    data::save_corpus(corpus, out_path);
    log(cfg, 1,
        "generated " + std::to_string(corpus.size()) + " statements (seed " +
            std::to_string(gen.seed) + ") -> " + out_path.string());
    return kExitOk;
}

int cmd_validate(const CliState& state) {
    const auto cfg = state.load();
    const auto corpus = load_corpus_checked(cfg);
    std::size_t mismatches = 0;
    std::size_t unwitnessed = 0;
    for (const auto& s : corpus.statements) {
        const auto r = data::validate_statement(s);
        if (r.status == data::ValidationStatus::Mismatch) {
            ++mismatches;
            std::cerr << s.id << ": " << r.reason << '\n';
        } else if (r.status == data::ValidationStatus::ValidUnwitnessed) {
            ++unwitnessed;
        }
    }
    log(cfg, 1,
        "validated " + std::to_string(corpus.size()) + " statements: " +
            std::to_string(mismatches) + " mismatches, " +
            std::to_string(unwitnessed) + " unwitnessed");
    return mismatches == 0 ? kExitOk : kExitValidationFailure;
}

int cmd_train(const CliState& state, const model::TrainConfig& overrides,
              bool epochs_set, bool lr_set, bool batch_set, bool seed_set) {
    auto cfg = state.load();
    if (epochs_set) cfg.train.epochs = overrides.epochs;
    if (lr_set) cfg.train.learning_rate = overrides.learning_rate;
    if (batch_set) cfg.train.batch_size = overrides.batch_size;
    if (seed_set) cfg.train.seed = overrides.seed;
    cfg.validate();

    const auto corpus = load_corpus_checked(cfg);
    const auto [train_split, test_split] = data::split(corpus, cfg.split);
    log(cfg, 1,
        "split " + std::to_string(corpus.size()) + " -> train " +
            std::to_string(train_split.size()) + " / test " +
            std::to_string(test_split.size()));

    const auto vocab = model::build_vocab(train_split);
    log(cfg, 1, "vocabulary: " + std::to_string(vocab.size()) + " tokens");

    const auto t0 = std::chrono::steady_clock::now();
    const auto [params, history] = model::train(
        train_split, test_split, vocab, cfg.model, cfg.train,
        [&](const model::EpochStats& e) {
            if (cfg.verbosity >= 1) {
                char line[160];
                std::snprintf(line, sizeof(line),
                              "epoch %3d  train_loss %.4f  val_loss %.4f  val_acc %.4f",
                              e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
                std::cerr << line << '\n';
            }
        },
        [&](int epoch, std::size_t batch_idx, double loss) {
            if (cfg.verbosity >= 2) {
                char line[120];
                std::snprintf(line, sizeof(line), "epoch %3d batch %4zu loss %.4f",
                              epoch, batch_idx, loss);
                std::cerr << line << '\n';
            }
        });
    const auto secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(cfg, 1, "training finished in " + std::to_string(secs) + " s");

    fs::create_directories(cfg.output_dir);
    model::save_checkpoint(params, cfg.model, vocab,
                           cfg.output_dir / fs::path("checkpoint.json"));
    write_file(cfg.output_dir / fs::path("history.csv"),
               model::history_to_csv(history));
    log(cfg, 1, "wrote checkpoint.json and history.csv to " + cfg.output_dir.string());
    return kExitOk;
}

int cmd_eval(const CliState& state, const std::string& checkpoint_path) {
    const auto cfg = state.load();
    const auto corpus = load_corpus_checked(cfg);
    const auto ck = load_checkpoint_checked(cfg, checkpoint_path);
    const auto [train_split, test_split] = data::split(corpus, cfg.split);

    const auto predicted = predict_corpus(test_split, ck);
    std::vector<data::RelationLabel> truth;
    truth.reserve(test_split.size());
    for (const auto& s : test_split.statements) truth.push_back(s.relation);

    const auto matrix = metrics::build_confusion(truth, predicted);
    const auto report = metrics::compute_report(matrix);

    fs::create_directories(cfg.output_dir);
    write_file(cfg.output_dir / fs::path("confusion.csv"),
               metrics::confusion_to_csv(matrix));
    write_file(cfg.output_dir / fs::path("metrics.csv"),
               metrics::report_to_csv(report));
    const auto text = metrics::report_to_text(report);
    write_file(cfg.output_dir / fs::path("metrics.txt"), text);
    std::cout << text;
    return kExitOk;
}

struct ExplainSelection {
    std::vector<std::string> sample_texts;
    std::map<data::RelationLabel, std::vector<std::string>> bar_texts;
};

ExplainSelection select_explain_texts(const config::RunConfig& cfg,
                                      const data::Corpus& test_split,
                                      const model::Checkpoint& ck) {
    ExplainSelection sel;
    const auto token_count = [&](const std::string& text) {
        return preprocess::preprocess_pipeline(text).tokens.size();
    };

    if (!cfg.explain.sample_texts.empty()) {
        sel.sample_texts = cfg.explain.sample_texts;
    } else {
        // per true class: shortest texts first, samples_per_class each
        std::map<data::RelationLabel, std::vector<std::pair<std::size_t, std::string>>>
            by_class;
        for (const auto& s : test_split.statements) {
            by_class[s.relation].emplace_back(token_count(s.text), s.text);
        }
        for (auto& [label, entries] : by_class) {
            std::stable_sort(
                entries.begin(), entries.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t i = 0;
                 i < std::min(entries.size(), cfg.explain.samples_per_class); ++i) {
                sel.sample_texts.push_back(entries[i].second);
            }
        }
    }

    // bar aggregation texts grouped by *predicted* class, shortest first
    const auto predicted = predict_corpus(test_split, ck);
    std::map<data::RelationLabel, std::vector<std::pair<std::size_t, std::string>>>
        by_pred;
    for (std::size_t i = 0; i < test_split.size(); ++i) {
        by_pred[predicted[i]].emplace_back(
            token_count(test_split.statements[i].text),
            test_split.statements[i].text);
    }
    for (auto& [label, entries] : by_pred) {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& out = sel.bar_texts[label];
        for (std::size_t i = 0;
             i < std::min(entries.size(), cfg.explain.bar_samples_per_class); ++i) {
            out.push_back(entries[i].second);
        }
    }
    return sel;
}

int cmd_explain(const CliState& state, const std::string& checkpoint_path,
                const std::vector<std::string>& texts_override) {
    auto cfg = state.load();
    if (!texts_override.empty()) cfg.explain.sample_texts = texts_override;

    const auto corpus = load_corpus_checked(cfg);
    const auto ck = load_checkpoint_checked(cfg, checkpoint_path);
    const auto [train_split, test_split] = data::split(corpus, cfg.split);
    const auto sel = select_explain_texts(cfg, test_split, ck);

    explain::ExplainOptions opts;
    opts.exact_limit = cfg.explain.exact_limit;
    opts.n_permutations = cfg.explain.n_permutations;
    opts.seed = cfg.explain.seed;

    const fs::path exp_dir = cfg.output_dir / fs::path("explanations");
    fs::create_directories(exp_dir);

    // per-sample text, all six classes
    std::vector<std::vector<explain::Attribution>> per_text;
    for (std::size_t t = 0; t < sel.sample_texts.size(); ++t) {
        const auto& text = sel.sample_texts[t];
        const explain::TokenGame game(ck.params, ck.vocab, ck.config, text);
        if (game.n_tokens() > opts.exact_limit) {
            log(cfg, 1,
                "text " + std::to_string(t + 1) + " has " +
                    std::to_string(game.n_tokens()) +
                    " tokens; falling back to permutation sampling");
        }
        auto attributions = explain::explain_all_classes(game, opts);
        for (const auto& a : attributions) {
            const std::string name = "sample" + std::to_string(t + 1) + "_" +
                                     std::string(data::label_ident(a.target_class)) +
                                     ".attributions";
            write_file(exp_dir / name, explain::attribution_to_json(a));
        }
        if (cfg.verbosity >= 1) {
            std::cout << "text " << (t + 1) << ": " << text << '\n';
            for (const auto& a : attributions) {
                std::cout << "  " << render::attribution_text(a, color_output())
                          << '\n';
            }
        }
        per_text.push_back(std::move(attributions));
    }

    // per-class bar summaries over the test split
    std::vector<explain::ClassBarSummary> bars;
    for (auto label : data::all_labels()) {
        const auto it = sel.bar_texts.find(label);
        if (it == sel.bar_texts.end() || it->second.empty()) {
            std::cerr << "warning: no test statements predicted as "
                      << data::label_name(label) << "; bar summary omitted\n";
            continue;
        }
        std::vector<explain::Attribution> group;
        for (const auto& text : it->second) {
            const explain::TokenGame game(ck.params, ck.vocab, ck.config, text);
            if (game.n_tokens() <= opts.exact_limit) {
                group.push_back(explain::shapley_exact(game, label, opts.exact_limit));
            } else {
                log(cfg, 1,
                    "bar text with " + std::to_string(game.n_tokens()) +
                        " tokens; falling back to permutation sampling");
                group.push_back(explain::shapley_sampled(
                    game, label, opts.n_permutations, opts.seed, true));
            }
        }
        auto summary = explain::aggregate_bar(label, group, cfg.explain.top_k);
        if (cfg.verbosity >= 1) {
            std::cout << render::bar_summary_text(summary);
        }
        bars.push_back(std::move(summary));
    }

    write_file(exp_dir / "explain.html", render::explain_html(per_text, bars));
    log(cfg, 1, "wrote " + (exp_dir / "explain.html").string());
    return kExitOk;
}

int cmd_gradcheck(const CliState& state, std::uint64_t seed, int samples) {
    const auto cfg = state.load();
    model::ModelConfig probe_cfg = cfg.model;
    probe_cfg.max_len = std::min(probe_cfg.max_len, 12);
    probe_cfg.dropout_rate = 0.0;

    constexpr int kProbeVocab = 32;
    auto params = model::probe_parameters<double>(probe_cfg, kProbeVocab, seed);

    const auto synth = [&](std::initializer_list<int> ids) {
        model::EncodedInput in;
        const auto len = static_cast<std::size_t>(probe_cfg.max_len);
        in.ids.assign(len, model::Vocab::kPad);
        in.attention_mask.assign(len, 0);
        in.segment_ids.assign(len, 0);
        std::size_t i = 0;
        for (int id : ids) {
            in.ids[i] = id;
            in.attention_mask[i] = 1;
            ++i;
        }
        return in;
    };
    const std::vector<model::EncodedInput> batch = {
        synth({2, 4, 5, 6, 7, 8, 9, 10}),
        synth({2, 11, 12, 13, 14}),
        synth({2, 15, 16}),
        synth({2, 17, 18, 19, 20, 21, 22, 23}),
    };
    const std::vector<int> labels = {0, 2, 4, 5};

    const double err =
        model::gradient_check(params, probe_cfg, batch, labels, samples, seed + 1);
    std::cout << "max relative gradient error: " << err << '\n';
    return err < 1e-4 ? kExitOk : kExitValidationFailure;
}

std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

int cmd_report(const CliState& state) {
    const auto cfg = state.load();
    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
         << "<title>Run report</title>\n<style>body{font-family:sans-serif;"
         << "margin:2em;} pre{background:#f5f5f5;padding:1em;overflow-x:auto;}"
         << "</style>\n</head>\n<body>\n<h1>Run report</h1>\n";

    const auto add_section = [&](const std::string& title, const fs::path& file) {
        html << "<h2>" << html_escape(title) << "</h2>\n";
        if (fs::exists(file)) {
            std::ifstream in(file, std::ios::binary);
            std::string content((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
            html << "<pre>" << html_escape(content) << "</pre>\n";
        } else {
            html << "<p>(" << html_escape(file.filename().string())
                 << " not generated yet)</p>\n";
        }
    };
    add_section("Metrics", cfg.output_dir / fs::path("metrics.txt"));
    add_section("Confusion matrix", cfg.output_dir / fs::path("confusion.csv"));
    add_section("Training history", cfg.output_dir / fs::path("history.csv"));

    html << "<h2>Explanations</h2>\n";
    const fs::path exp = cfg.output_dir / fs::path("explanations/explain.html");
    if (fs::exists(exp)) {
        html << "<p><a href=\"explanations/explain.html\">Shapley explanation "
                "report</a></p>\n";
    } else {
        html << "<p>(no explanation report yet)</p>\n";
    }
    html << "</body>\n</html>\n";

    fs::create_directories(cfg.output_dir);
    write_file(cfg.output_dir / fs::path("report.html"), html.str());
    log(cfg, 1, "wrote " + (cfg.output_dir / fs::path("report.html")).string());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mathematical entity relation extraction: generate, train, "
                 "evaluate, and explain"};
    app.require_subcommand(1);
    app.fallthrough();

    CliState state;
    app.add_option("--config", state.config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);
    app.add_option("--outdir", state.output_dir,
                   "output directory (overrides config)");
    app.add_option("--corpus", state.corpus_path,
                   "corpus CSV path (overrides config)");
    app.add_option("--verbosity", state.verbosity,
                   "0 silent, 1 per-epoch, 2 per-batch");

    auto* generate = app.add_subcommand("generate", "write a synthetic corpus CSV");
    std::size_t gen_n = 0;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    auto* gen_n_opt = generate->add_option("--n", gen_n, "number of statements");
    auto* gen_seed_opt = generate->add_option("--seed", gen_seed, "generator seed");
    generate->add_option("--out", gen_out, "corpus CSV path");

    auto* validate = app.add_subcommand("validate", "arithmetic-check a corpus");

    auto* train = app.add_subcommand("train", "train and write checkpoint + history");
    model::TrainConfig train_over;
    auto* epochs_opt = train->add_option("--epochs", train_over.epochs, "training epochs");
    auto* lr_opt = train->add_option("--lr", train_over.learning_rate, "learning rate");
    auto* batch_opt =
        train->add_option("--batch-size", train_over.batch_size, "batch size");
    auto* tseed_opt = train->add_option("--seed", train_over.seed, "training seed");

    auto* eval = app.add_subcommand("eval", "evaluate checkpoint on the test split");
    std::string eval_ck;
    eval->add_option("--checkpoint", eval_ck, "checkpoint path");

    auto* explain_cmd =
        app.add_subcommand("explain", "Shapley attributions and reports");
    std::string explain_ck;
    std::vector<std::string> explain_texts;
    explain_cmd->add_option("--checkpoint", explain_ck, "checkpoint path");
    explain_cmd->add_option("--text", explain_texts, "explain this text (repeatable)");

    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::uint64_t gc_seed = 12345;
    int gc_samples = 20;
    gradcheck->add_option("--seed", gc_seed, "probe seed");
    gradcheck->add_option("--samples", gc_samples, "samples per parameter group")
        ->check(CLI::Range(1, 10000));

    auto* report = app.add_subcommand("report", "bundle outputs into one HTML index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (generate->parsed()) {
            return cmd_generate(state, gen_n, gen_seed, gen_n_opt->count() > 0,
                                gen_seed_opt->count() > 0, gen_out);
        }
        if (validate->parsed()) return cmd_validate(state);
        if (train->parsed()) {
            return cmd_train(state, train_over, epochs_opt->count() > 0,
                             lr_opt->count() > 0, batch_opt->count() > 0,
                             tseed_opt->count() > 0);
        }
        if (eval->parsed()) return cmd_eval(state, eval_ck);
        if (explain_cmd->parsed()) return cmd_explain(state, explain_ck, explain_texts);
        if (gradcheck->parsed()) return cmd_gradcheck(state, gc_seed, gc_samples);
        if (report->parsed()) return cmd_report(state);
        std::cerr << "no subcommand given\n";
        return kExitUsage;
    } catch (const config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidationFailure;
    }
}
