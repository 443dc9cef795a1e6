#include "mathrel/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace mathrel;
using config::ConfigError;
using config::load_config;

namespace {

struct TempConfig {
    std::filesystem::path path;
    explicit TempConfig(const std::string& content)
        : path(std::filesystem::temp_directory_path() / "mathrel_cfg_test.json") {
        std::ofstream(path) << content;
    }
    ~TempConfig() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("empty config file yields all defaults") {
    const TempConfig tmp("");
    const auto cfg = load_config(tmp.path);
    CHECK(cfg.model.d_model == 64);
    CHECK(cfg.model.n_layers == 2);
    CHECK(cfg.model.n_heads == 4);
    CHECK(cfg.model.ffn_dim == 256);
    CHECK(cfg.model.max_len == 50);
    CHECK(cfg.train.learning_rate == 2e-4);
    CHECK(cfg.train.batch_size == 12);
    CHECK(cfg.train.epochs == 10);
    CHECK(cfg.split.train_fraction == 0.8);
    CHECK(cfg.generator.n == 3284);
    CHECK(cfg.explain.exact_limit == 15);
    CHECK(cfg.explain.n_permutations == 2000);
    CHECK(cfg.verbosity == 1);
}

TEST_CASE("no config path yields defaults too") {
    const auto cfg = load_config({});
    CHECK(cfg.generator.n == 3284);
    CHECK(cfg.output_dir == "out");
}

TEST_CASE("values load and invalid ones carry the field path") {
    SUBCASE("valid overrides") {
        const TempConfig tmp(R"({
            "output_dir": "results",
            "train": {"epochs": 40, "learning_rate": 0.0002},
            "model": {"d_model": 32, "n_heads": 2},
            "generator": {"n": 600, "seed": 3,
                          "distribution": {"Addition": 0.5, "Square Root": 0.5}}
        })");
        const auto cfg = load_config(tmp.path);
        CHECK(cfg.output_dir == "results");
        CHECK(cfg.train.epochs == 40);
        CHECK(cfg.model.d_model == 32);
        CHECK(cfg.generator.distribution[static_cast<std::size_t>(
                  data::RelationLabel::SquareRoot)] == 0.5);
    }

    SUBCASE("negative learning rate names the field") {
        const TempConfig tmp(R"({"train": {"learning_rate": -1}})");
        try {
            load_config(tmp.path);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field == "train.learning_rate");
        }
    }

    SUBCASE("unknown key rejected") {
        const TempConfig tmp(R"({"train": {"learning_rat": 0.001}})");
        CHECK_THROWS_AS(load_config(tmp.path), ConfigError);
    }

    SUBCASE("bad distribution class") {
        const TempConfig tmp(R"({"generator": {"distribution": {"Modulo": 1.0}}})");
        CHECK_THROWS_AS(load_config(tmp.path), ConfigError);
    }

    SUBCASE("distribution must sum to 1") {
        const TempConfig tmp(R"({"generator": {"distribution": {"Addition": 0.9}}})");
        CHECK_THROWS_AS(load_config(tmp.path), ConfigError);
    }

    SUBCASE("invalid JSON") {
        const TempConfig tmp("{not json");
        CHECK_THROWS_AS(load_config(tmp.path), ConfigError);
    }
}

TEST_CASE("MATHREL_SEED fills seeds not set explicitly") {
    setenv("MATHREL_SEED", "99", 1);
    const TempConfig tmp(R"({"generator": {"seed": 5}})");
    const auto cfg = load_config(tmp.path);
    CHECK(cfg.generator.seed == 5);   // explicit file value wins
    CHECK(cfg.split.seed == 99);      // absent fields take the env default
    CHECK(cfg.train.seed == 99);
    unsetenv("MATHREL_SEED");

    const auto plain = load_config(tmp.path);
    CHECK(plain.split.seed == 13);
}
