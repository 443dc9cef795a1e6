#include "mathrel/data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mathrel/csv.hpp"
#include "mathrel/numeral.hpp"

using namespace mathrel;
using namespace mathrel::data;

namespace {

Statement make(const std::string& text, const std::string& e1,
               const std::string& e2, RelationLabel rel) {
    Statement s;
    s.id = "x";
    s.text = text;
    s.entity1 = e1;
    s.entity2 = e2;
    s.relation = rel;
    return s;
}

// Six hand-written observations covering every relation class.
std::vector<Statement> table1_rows() {
    return {
        make("Eighteen players of the Sri Lankan national cricket team have "
             "come to play in Bangladesh. Bangladesh team also has eighteen "
             "players. There is total thirty six players in two teams.",
             "Eighteen", "Eighteen", RelationLabel::Addition),
        make("Subtracting fifty from ten is equals forty.", "Fifty", "Ten",
             RelationLabel::Subtraction),
        make("Two thousand multiplied by five is ten thousand.", "Two Thousand",
             "Two", RelationLabel::Multiplication),
        make("The square root of four is two .", "Four", "Two",
             RelationLabel::SquareRoot),
        make("The factorial value of seven is five thousand and forty.",
             "Seven", "Five Thousand Forty", RelationLabel::Factorial),
        make("Man bought twelve mangoes and divided them equally among three "
             "children. Each child got four of mangoes.",
             "Twelve", "Three", RelationLabel::Division),
    };
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name)
        : path(std::filesystem::temp_directory_path() / name) {}
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("label names and codes") {
    CHECK(static_cast<int>(RelationLabel::Addition) == 0);
    CHECK(static_cast<int>(RelationLabel::Factorial) == 5);
    CHECK(label_name(RelationLabel::SquareRoot) == "Square Root");
    CHECK(label_ident(RelationLabel::SquareRoot) == "SquareRoot");
    CHECK(label_from_name("Square Root") == RelationLabel::SquareRoot);
    CHECK(label_from_name("SquareRoot") == RelationLabel::SquareRoot);
    CHECK(!label_from_name("Modulo").has_value());
}

TEST_CASE("validate_statement on the reference rows") {
    const auto rows = table1_rows();
    CHECK(validate_statement(rows[0]).witnessed());   // 18+18=36
    CHECK(validate_statement(rows[1]).witnessed());   // |50-10|=40
    CHECK(validate_statement(rows[3]).witnessed());   // sqrt(4)=2
    CHECK(validate_statement(rows[4]).witnessed());   // 7! = 5040
    CHECK(validate_statement(rows[5]).witnessed());   // 12/3=4

    // row 3 as printed: entity2 "Two" cannot witness 2000*2 anywhere in text
    const auto r = validate_statement(rows[2]);
    CHECK(r.status == ValidationStatus::Mismatch);
    CHECK(!r.reason.empty());
}

TEST_CASE("validate_statement edge cases") {
    // unparsable entity
    auto s = make("fiveteen things", "fiveteen", "two", RelationLabel::Addition);
    CHECK(validate_statement(s).status == ValidationStatus::Mismatch);

    // entity missing from text
    s = make("Three plus three is six.", "three", "nine", RelationLabel::Addition);
    CHECK(validate_statement(s).status == ValidationStatus::Mismatch);

    // no third number: unwitnessed
    s = make("Add five to ten.", "five", "ten", RelationLabel::Addition);
    CHECK(validate_statement(s).status == ValidationStatus::ValidUnwitnessed);

    // order-agnostic subtraction and division
    s = make("Subtracting fifty from ten is equals forty.", "Ten", "Fifty",
             RelationLabel::Subtraction);
    CHECK(validate_statement(s).witnessed());
    s = make("Twelve divided by three is four.", "three", "twelve",
             RelationLabel::Division);
    CHECK(validate_statement(s).witnessed());

    // square root in both directions
    s = make("Two is the square root of four.", "two", "four",
             RelationLabel::SquareRoot);
    CHECK(validate_statement(s).witnessed());
}

TEST_CASE("largest remainder counts for the default distribution") {
    const auto counts = largest_remainder_counts(3284, default_class_distribution());
    std::size_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == 3284);
    // SquareRoot ~25.72% of 3284 = 844.6, Factorial ~12.91% = 424.0
    const auto sr = counts[static_cast<std::size_t>(RelationLabel::SquareRoot)];
    const auto fa = counts[static_cast<std::size_t>(RelationLabel::Factorial)];
    CHECK(std::abs(static_cast<long>(sr) - 845) <= 1);
    CHECK(std::abs(static_cast<long>(fa) - 424) <= 1);
    for (RelationLabel l : {RelationLabel::Addition, RelationLabel::Subtraction,
                            RelationLabel::Multiplication, RelationLabel::Division}) {
        const auto c = counts[static_cast<std::size_t>(l)];
        CHECK(std::abs(static_cast<long>(c) - 504) <= 1);
    }

    CHECK_THROWS_AS(largest_remainder_counts(100, ClassFractions{0.5, 0.5, 0.5, 0, 0, 0}),
                    InfeasibleDistribution);
}

TEST_CASE("generate_synthetic basic contracts") {
    ClassFractions uniform{};
    uniform.fill(1.0 / 6.0);

    SUBCASE("minimal corpus: one statement per class") {
        const auto c = generate_synthetic(6, uniform, 3);
        REQUIRE(c.size() == 6);
        std::set<RelationLabel> seen;
        for (const auto& s : c.statements) seen.insert(s.relation);
        CHECK(seen.size() == 6);
    }

    SUBCASE("determinism: same seed, same corpus") {
        const auto c1 = generate_synthetic(60, uniform, 9);
        const auto c2 = generate_synthetic(60, uniform, 9);
        REQUIRE(c1.size() == c2.size());
        for (std::size_t i = 0; i < c1.size(); ++i) {
            CHECK(c1.statements[i].id == c2.statements[i].id);
            CHECK(c1.statements[i].text == c2.statements[i].text);
            CHECK(c1.statements[i].relation == c2.statements[i].relation);
        }
    }

    SUBCASE("every statement witnessed-valid and unique") {
        const auto c = generate_synthetic(300, default_class_distribution(), 7);
        REQUIRE(c.size() == 300);
        std::set<std::string> keys;
        for (const auto& s : c.statements) {
            const auto v = validate_statement(s);
            CAPTURE(s.text);
            CHECK(v.witnessed());
            CHECK(keys.insert(normalized_text(s.text)).second);
        }
    }

    SUBCASE("distribution error at most one statement per class") {
        const auto c = generate_synthetic(500, default_class_distribution(), 11);
        const auto f = class_distribution(c);
        const auto want = default_class_distribution();
        for (int i = 0; i < kNumClasses; ++i) {
            CHECK(std::abs(f[static_cast<std::size_t>(i)] -
                           want[static_cast<std::size_t>(i)]) <= 1.0 / 500 + 1e-12);
        }
    }
}

TEST_CASE("corpus csv roundtrip") {
    Corpus c;
    c.statements = table1_rows();
    for (std::size_t i = 0; i < c.size(); ++i) {
        c.statements[i].id = "t" + std::to_string(i + 1);
    }
    // a text with comma and quotes exercises RFC 4180 quoting
    c.statements[0].text += " Note: \"two teams\", total.";

    TempFile tmp("mathrel_test_corpus.csv");
    save_corpus(c, tmp.path);
    const auto back = load_corpus(tmp.path);
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back.statements[i].id == c.statements[i].id);
        CHECK(back.statements[i].text == c.statements[i].text);
        CHECK(back.statements[i].entity1 == c.statements[i].entity1);
        CHECK(back.statements[i].entity2 == c.statements[i].entity2);
        CHECK(back.statements[i].relation == c.statements[i].relation);
    }
}

TEST_CASE("corpus csv rejects malformed rows") {
    TempFile tmp("mathrel_bad_corpus.csv");

    SUBCASE("unparsable entity") {
        std::ofstream(tmp.path) << "id,text,entity1,entity2,relation\n"
                                << "a1,fiveteen plus two,fiveteen,two,Addition\n";
        CHECK_THROWS_AS(load_corpus(tmp.path), SchemaError);
    }
    SUBCASE("unknown relation") {
        std::ofstream(tmp.path) << "id,text,entity1,entity2,relation\n"
                                << "a1,five plus two is seven,five,two,Modulo\n";
        CHECK_THROWS_AS(load_corpus(tmp.path), SchemaError);
    }
    SUBCASE("duplicate text") {
        std::ofstream(tmp.path) << "id,text,entity1,entity2,relation\n"
                                << "a1,five plus two is seven,five,two,Addition\n"
                                << "a2,Five plus two is seven.,five,two,Addition\n";
        CHECK_THROWS_AS(load_corpus(tmp.path), DuplicateText);
    }
    SUBCASE("wrong field count") {
        std::ofstream(tmp.path) << "id,text,entity1,entity2,relation\n"
                                << "a1,five plus two is seven,five,two\n";
        CHECK_THROWS_AS(load_corpus(tmp.path), SchemaError);
    }
}

TEST_CASE("split sizes, disjointness, determinism") {
    ClassFractions uniform{};
    uniform.fill(1.0 / 6.0);
    const auto corpus = generate_synthetic(120, uniform, 21);

    const auto [train, test] = split(corpus, {0.8, 5});
    CHECK(train.size() == 96);
    CHECK(test.size() == 24);

    std::set<std::string> ids;
    for (const auto& s : train.statements) ids.insert(s.id);
    for (const auto& s : test.statements) CHECK(ids.count(s.id) == 0);
    CHECK(ids.size() + test.size() == corpus.size());

    const auto [train2, test2] = split(corpus, {0.8, 5});
    for (std::size_t i = 0; i < train.size(); ++i) {
        CHECK(train.statements[i].id == train2.statements[i].id);
    }

    // rounding edge: n=5, fraction 0.8 -> 4/1
    Corpus small;
    small.statements.assign(corpus.statements.begin(), corpus.statements.begin() + 5);
    const auto [tr5, te5] = split(small, {0.8, 9});
    CHECK(tr5.size() == 4);
    CHECK(te5.size() == 1);
}

TEST_CASE("class_distribution") {
    Corpus single;
    single.statements = {table1_rows()[3]};
    const auto f = class_distribution(single);
    CHECK(f[static_cast<std::size_t>(RelationLabel::SquareRoot)] == 1.0);
    CHECK(f[static_cast<std::size_t>(RelationLabel::Addition)] == 0.0);

    CHECK_THROWS_AS(class_distribution(Corpus{}), EmptyCorpus);

    ClassFractions uniform{};
    uniform.fill(1.0 / 6.0);
    const auto c6 = generate_synthetic(6, uniform, 4);
    const auto f6 = class_distribution(c6);
    for (double v : f6) CHECK(v == doctest::Approx(1.0 / 6.0));
}
