#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mathrel::data {

// Closed 6-way operator relation set with stable integer codes.
enum class RelationLabel : int {
    Addition = 0,
    Subtraction = 1,
    Multiplication = 2,
    Division = 3,
    SquareRoot = 4,
    Factorial = 5,
};

inline constexpr int kNumClasses = 6;

constexpr std::array<RelationLabel, kNumClasses> all_labels() {
    return {RelationLabel::Addition,       RelationLabel::Subtraction,
            RelationLabel::Multiplication, RelationLabel::Division,
            RelationLabel::SquareRoot,     RelationLabel::Factorial};
}

// Display/serialization name ("Square Root" has a space).
std::string_view label_name(RelationLabel label);
// Identifier-safe name ("SquareRoot").
std::string_view label_ident(RelationLabel label);
std::optional<RelationLabel> label_from_name(std::string_view name);

// One labeled word problem. Both entity phrases parse under the numeral
// grammar and occur (case-insensitively, interior "and" optional) in `text`.
struct Statement {
    std::string id;
    std::string text;
    std::string entity1;
    std::string entity2;
    RelationLabel relation = RelationLabel::Addition;
};

struct Corpus {
    std::vector<Statement> statements;
    std::string provenance;

    std::size_t size() const { return statements.size(); }
    bool empty() const { return statements.empty(); }
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

using ClassFractions = std::array<double, kNumClasses>;

// Default class mix: Square Root 25.72%, Factorial 12.91%, the four linear
// operators sharing the remainder equally.
ClassFractions default_class_distribution();

struct InfeasibleDistribution : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GenerationExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    std::size_t row;
    SchemaError(std::size_t row_, const std::string& what)
        : std::runtime_error("row " + std::to_string(row_) + ": " + what), row(row_) {}
};
struct DuplicateText : std::runtime_error {
    std::size_t row;
    DuplicateText(std::size_t row_, const std::string& what)
        : std::runtime_error("row " + std::to_string(row_) + ": " + what), row(row_) {}
};
struct EmptyCorpus : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Largest-remainder apportionment of n statements over class fractions.
std::array<std::size_t, kNumClasses> largest_remainder_counts(
    std::size_t n, const ClassFractions& fractions);

// Seeded synthetic corpus with arithmetic-consistent templates. Every
// statement passes witnessed validation; texts are unique after
// normalization.
Corpus generate_synthetic(std::size_t n, const ClassFractions& fractions,
                          std::uint64_t seed);

enum class ValidationStatus { Valid, ValidUnwitnessed, Mismatch };

struct ValidationResult {
    ValidationStatus status = ValidationStatus::Valid;
    std::string reason;

    bool ok() const { return status != ValidationStatus::Mismatch; }
    bool witnessed() const { return status == ValidationStatus::Valid; }
};

// Arithmetic-consistency check. Subtraction/division accept either operand
// order; a third number in the text acts as the witness for the four linear
// operators.
ValidationResult validate_statement(const Statement& s);

// CSV schema: header id,text,entity1,entity2,relation; RFC 4180 quoting.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Seeded uniform shuffle, then prefix split with |train| = round(f * n).
std::pair<Corpus, Corpus> split(const Corpus& corpus, const SplitSpec& spec);

ClassFractions class_distribution(const Corpus& corpus);

// Uniqueness key: cleaned, lowercased, whitespace-collapsed text.
std::string normalized_text(std::string_view text);

}  // namespace mathrel::data
