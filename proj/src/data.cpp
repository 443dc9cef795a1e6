#include "mathrel/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "mathrel/csv.hpp"
#include "mathrel/numeral.hpp"
#include "mathrel/preprocess.hpp"
#include "mathrel/rng.hpp"

namespace mathrel::data {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "Addition", "Subtraction", "Multiplication",
    "Division", "Square Root", "Factorial"};

constexpr std::array<std::string_view, kNumClasses> kLabelIdents = {
    "Addition", "Subtraction", "Multiplication",
    "Division", "SquareRoot", "Factorial"};

constexpr std::array<std::int64_t, 13> kFactorials = {
    1,      1,       2,        6,         24,        120,      720,
    5040,   40320,   362880,   3628800,   39916800,  479001600};

std::vector<std::string> text_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isalpha(c) || std::isdigit(c)) {
            std::string w;
            const bool digit = std::isdigit(c) != 0;
            while (i < text.size()) {
                const unsigned char cc = static_cast<unsigned char>(text[i]);
                const bool same_kind = digit ? std::isdigit(cc) != 0 : std::isalpha(cc) != 0;
                if (!same_kind) break;
                w.push_back(static_cast<char>(std::tolower(cc)));
                ++i;
            }
            words.push_back(std::move(w));
        } else {
            ++i;
        }
    }
    return words;
}

std::optional<std::int64_t> parse_phrase_string(std::string_view phrase) {
    const std::vector<std::string> words = text_words(phrase);
    if (words.empty()) return std::nullopt;
    try {
        return numeral::parse_number_phrase(words);
    } catch (const numeral::MalformedNumeral&) {
        return std::nullopt;
    }
}

// Contiguous occurrence of the entity words in the text, skipping "and"
// tokens on the text side ("five thousand forty" matches "five thousand and
// forty").
bool entity_present(const std::vector<std::string>& text_ws, std::string_view entity) {
    std::vector<std::string> ent = text_words(entity);
    std::erase(ent, "and");
    if (ent.empty()) return false;
    for (std::size_t start = 0; start < text_ws.size(); ++start) {
        if (text_ws[start] != ent[0]) continue;
        std::size_t k = start;
        std::size_t e = 0;
        while (e < ent.size() && k < text_ws.size()) {
            if (text_ws[k] == "and") {
                ++k;
                continue;
            }
            if (text_ws[k] != ent[e]) break;
            ++k;
            ++e;
        }
        if (e == ent.size()) return true;
    }
    return false;
}

bool relation_holds(RelationLabel rel, std::int64_t a, std::int64_t b, std::int64_t c) {
    switch (rel) {
        case RelationLabel::Addition:
            return a + b == c;
        case RelationLabel::Subtraction:
            return (a >= b ? a - b : b - a) == c;
        case RelationLabel::Multiplication:
            return a * b == c;
        case RelationLabel::Division:
            return (b != 0 && a % b == 0 && a / b == c) ||
                   (a != 0 && b % a == 0 && b / a == c);
        default:
            return false;
    }
}

bool square_root_holds(std::int64_t a, std::int64_t b) {
    return (b * b == a) || (a * a == b);
}

bool factorial_holds(std::int64_t a, std::int64_t b) {
    for (std::size_t i = 0; i < kFactorials.size(); ++i) {
        const auto n = static_cast<std::int64_t>(i);
        if ((a == n && kFactorials[i] == b) || (b == n && kFactorials[i] == a)) {
            return true;
        }
    }
    return false;
}

// ------------------------- synthetic templates -------------------------

struct Template {
    const char* text;  // %A, %B, %C placeholders
};

const std::array<std::vector<Template>, kNumClasses>& class_templates() {
    static const std::array<std::vector<Template>, kNumClasses> t = {{
        // Addition: a + b = c
        {
            {"%A players of the Sri Lankan national cricket team have come to "
             "play in Bangladesh. Bangladesh team also has %B players. There is "
             "total %C players in two teams."},
            {"Adding %A to %B gives %C."},
            {"The sum of %A and %B is %C."},
            {"A shop sold %A books in the morning and %B books in the "
             "afternoon, so %C books were sold that day."},
            {"%A boys and %B girls are in the class, so the class has %C "
             "students in total."},
            {"Rina had %A stamps and her friend gave her %B more, making %C "
             "stamps altogether."},
            {"The total of %A plus %B equals %C."},
        },
        // Subtraction: a - b = c
        {
            {"Subtracting %B from %A is equals %C."},
            {"A farmer had %A eggs and sold %B of them, so %C eggs remain."},
            {"Take away %B from %A and the difference is %C."},
            {"The difference between %A and %B is %C."},
            {"Out of %A seats only %B are filled, leaving %C seats empty."},
            {"%A minus %B leaves %C."},
            {"A tank held %A liters of water and %B liters leaked out, so %C "
             "liters remain."},
        },
        // Multiplication: a * b = c
        {
            {"%A multiplied by %B is %C."},
            {"Each packet contains %A chocolates and there are %B packets, "
             "making %C chocolates."},
            {"A box holds %A pens and %B boxes together hold %C pens."},
            {"%A times %B equals %C."},
            {"The product of %A and %B is %C."},
            {"Every shelf carries %A books and %B shelves carry %C books."},
            {"A worker earns %A taka per day and in %B days earns %C taka."},
        },
        // Division: a / b = c
        {
            {"A man bought %A mangoes and divided them equally among %B "
             "children. Each child got %C mangoes."},
            {"%A divided by %B is %C."},
            {"Dividing %A by %B gives %C."},
            {"%A apples were shared equally among %B friends and each friend "
             "received %C apples."},
            {"A rope of %A meters is cut into %B equal pieces of %C meters "
             "each."},
            {"The teacher split %A students into %B equal groups of %C "
             "students."},
            {"%A candies were packed equally into %B jars with %C candies in "
             "each jar."},
        },
        // Square Root: sqrt(a) = b. The radicand range is narrow, so several
        // templates carry a name or object slot for surface variety.
        {
            {"The square root of %A is %B."},
            {"%B squared gives %A."},
            {"The square root value of %A equals %B."},
            {"A square garden of area %A square meters has sides of %B "
             "meters."},
            {"Taking the square root of %A results in %B."},
            {"%A has a square root of %B."},
            {"The root of the square number %A is %B."},
            {"%N drew a square of area %A square centimeters with sides of %B "
             "centimeters."},
            {"A square %O of area %A square units has sides of %B units."},
            {"%N computed the square root of %A and got %B."},
            {"%N says the square root of %A equals %B."},
            {"A square %O covering %A square feet has a side length of %B "
             "feet."},
            {"%N worked out that the square root of %A is %B."},
            {"The square %O has area %A so each side measures %B."},
        },
        // Factorial: a! = b, same trick for the narrow operand range
        {
            {"The factorial value of %A is %B."},
            {"The factorial of %A equals %B."},
            {"%A factorial is %B."},
            {"Computing the factorial of %A gives %B."},
            {"The product of all numbers from one to %A is %B."},
            {"The factorial operation on %A produces %B."},
            {"Multiplying every number up to %A gives the factorial %B."},
            {"%N calculated that the factorial of %A is %B."},
            {"%N found the factorial value of %A to be %B."},
            {"According to %N the factorial of %A equals %B."},
            {"%N wrote that %A factorial equals %B."},
            {"In class %N showed that the factorial of %A is %B."},
        },
    }};
    return t;
}

struct Operands {
    std::int64_t a = 0;
    std::int64_t b = 0;
    std::int64_t c = 0;   // 0 when the relation needs no witness
    bool has_c = true;
};

// Mixes magnitudes so most texts stay short while the full 1..10,000 range
// stays covered.
std::int64_t draw_linear(Rng& rng) {
    static constexpr std::array<std::int64_t, 4> scales = {20, 100, 1000, 10000};
    const auto scale = scales[static_cast<std::size_t>(rng.uniform_below(scales.size()))];
    return rng.uniform_int(1, scale);
}

Operands draw_operands(RelationLabel rel, Rng& rng) {
    Operands o;
    switch (rel) {
        case RelationLabel::Addition:
            o.a = draw_linear(rng);
            o.b = draw_linear(rng);
            o.c = o.a + o.b;
            break;
        case RelationLabel::Subtraction:
            do {
                o.a = draw_linear(rng);
            } while (o.a < 2);
            o.b = rng.uniform_int(1, o.a - 1);
            o.c = o.a - o.b;
            break;
        case RelationLabel::Multiplication:
            o.a = draw_linear(rng);
            o.b = draw_linear(rng);
            o.c = o.a * o.b;
            break;
        case RelationLabel::Division:
            o.b = rng.uniform_int(1, 100);
            o.c = rng.uniform_int(1, 100);
            o.a = o.b * o.c;
            break;
        case RelationLabel::SquareRoot:
            o.b = rng.uniform_int(1, 40);
            o.a = o.b * o.b;
            o.has_c = false;
            break;
        case RelationLabel::Factorial:
            o.a = rng.uniform_int(2, 12);
            o.b = kFactorials[static_cast<std::size_t>(o.a)];
            o.has_c = false;
            break;
    }
    return o;
}

std::string phrase_of(std::int64_t n) {
    std::string out;
    for (const auto& w : numeral::render_number_words(n)) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

constexpr std::array<const char*, 24> kNames = {
    "Rina",  "Karim", "Salma",  "Rahim", "Fatima", "Jamal", "Nadia", "Hasan",
    "Mina",  "Farid", "Ruma",   "Sumon", "Laila",  "Arif",  "Shila", "Babul",
    "Rosy",  "Imran", "Dipa",   "Kamal", "Shanta", "Rafiq", "Mitu",  "Belal"};

constexpr std::array<const char*, 12> kObjects = {
    "garden", "field", "plot",   "carpet", "banner", "tile",
    "board",  "park",  "canvas", "mirror", "window", "poster"};

std::string instantiate(const Template& tpl, const Operands& o, Rng& rng) {
    const std::string pa = phrase_of(o.a);
    const std::string pb = phrase_of(o.b);
    const std::string pc = o.has_c ? phrase_of(o.c) : std::string();
    std::string out;
    const std::string_view t = tpl.text;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '%' && i + 1 < t.size()) {
            switch (t[i + 1]) {
                case 'A': out += pa; ++i; continue;
                case 'B': out += pb; ++i; continue;
                case 'C': out += pc; ++i; continue;
                case 'N':
                    out += kNames[static_cast<std::size_t>(rng.uniform_below(kNames.size()))];
                    ++i;
                    continue;
                case 'O':
                    out += kObjects[static_cast<std::size_t>(rng.uniform_below(kObjects.size()))];
                    ++i;
                    continue;
                default: break;
            }
        }
        out.push_back(t[i]);
    }
    if (!out.empty()) {
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    }
    return out;
}

// The instantiated text must expose a, b (and c for witnessed relations) as
// distinct extracted phrases; adjacent phrases occasionally merge ("five
// thousand" + "and forty") and such drafts are resampled.
bool extraction_consistent(const Statement& s, const Operands& o) {
    std::vector<std::int64_t> values;
    for (const auto& p : numeral::extract_number_phrases(s.text)) {
        values.push_back(p.value);
    }
    const auto take = [&values](std::int64_t v) {
        const auto it = std::find(values.begin(), values.end(), v);
        if (it == values.end()) return false;
        values.erase(it);
        return true;
    };
    if (!take(o.a) || !take(o.b)) return false;
    if (o.has_c && !take(o.c)) return false;
    return true;
}

}  // namespace

std::string_view label_name(RelationLabel label) {
    return kLabelNames[static_cast<std::size_t>(label)];
}

std::string_view label_ident(RelationLabel label) {
    return kLabelIdents[static_cast<std::size_t>(label)];
}

std::optional<RelationLabel> label_from_name(std::string_view name) {
    for (int i = 0; i < kNumClasses; ++i) {
        if (name == kLabelNames[static_cast<std::size_t>(i)] ||
            name == kLabelIdents[static_cast<std::size_t>(i)]) {
            return static_cast<RelationLabel>(i);
        }
    }
    return std::nullopt;
}

ClassFractions default_class_distribution() {
    // Square Root 25.72% and Factorial 12.91%; the remaining 61.37% splits
    // evenly over the four linear operators.
    ClassFractions f{};
    f[static_cast<std::size_t>(RelationLabel::SquareRoot)] = 0.2572;
    f[static_cast<std::size_t>(RelationLabel::Factorial)] = 0.1291;
    const double rest = (1.0 - 0.2572 - 0.1291) / 4.0;
    for (RelationLabel l : {RelationLabel::Addition, RelationLabel::Subtraction,
                            RelationLabel::Multiplication, RelationLabel::Division}) {
        f[static_cast<std::size_t>(l)] = rest;
    }
    return f;
}

std::array<std::size_t, kNumClasses> largest_remainder_counts(
    std::size_t n, const ClassFractions& fractions) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw InfeasibleDistribution("negative class fraction");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InfeasibleDistribution("class fractions must sum to 1");
    }

    std::array<std::size_t, kNumClasses> counts{};
    std::array<double, kNumClasses> remainders{};
    std::size_t assigned = 0;
    for (int i = 0; i < kNumClasses; ++i) {
        const double exact = fractions[static_cast<std::size_t>(i)] * static_cast<double>(n);
        counts[static_cast<std::size_t>(i)] = static_cast<std::size_t>(exact);
        remainders[static_cast<std::size_t>(i)] = exact - static_cast<double>(counts[static_cast<std::size_t>(i)]);
        assigned += counts[static_cast<std::size_t>(i)];
    }
    if (assigned > n) throw InfeasibleDistribution("rounding exceeded n");

    std::array<int, kNumClasses> order = {0, 1, 2, 3, 4, 5};
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return remainders[static_cast<std::size_t>(x)] > remainders[static_cast<std::size_t>(y)];
    });
    std::size_t leftover = n - assigned;
    for (int idx : order) {
        if (leftover == 0) break;
        ++counts[static_cast<std::size_t>(idx)];
        --leftover;
    }
    return counts;
}

Corpus generate_synthetic(std::size_t n, const ClassFractions& fractions,
                          std::uint64_t seed) {
    if (n < static_cast<std::size_t>(kNumClasses)) {
        throw InfeasibleDistribution("need at least one statement per class slot");
    }
    const auto counts = largest_remainder_counts(n, fractions);
    const auto& templates = class_templates();

    Rng rng(seed);
    std::unordered_set<std::string> used;
    std::vector<Statement> statements;
    statements.reserve(n);

    for (int ci = 0; ci < kNumClasses; ++ci) {
        const auto rel = static_cast<RelationLabel>(ci);
        const auto& tpls = templates[static_cast<std::size_t>(ci)];
        std::size_t emitted = 0;
        std::size_t failures = 0;
        while (emitted < counts[static_cast<std::size_t>(ci)]) {
            if (failures > 10'000) {
                throw GenerationExhausted(
                    "cannot satisfy uniqueness for class " +
                    std::string(label_name(rel)));
            }
            const auto& tpl = tpls[static_cast<std::size_t>(rng.uniform_below(tpls.size()))];
            const Operands o = draw_operands(rel, rng);

            Statement s;
            s.text = instantiate(tpl, o, rng);
            s.entity1 = phrase_of(o.a);
            s.entity2 = phrase_of(o.b);
            s.relation = rel;

            const std::string key = normalized_text(s.text);
            if (used.count(key) || !extraction_consistent(s, o) ||
                !validate_statement(s).witnessed()) {
                ++failures;
                continue;
            }
            used.insert(key);
            statements.push_back(std::move(s));
            ++emitted;
            failures = 0;
        }
    }

    rng.shuffle(statements);
    Corpus corpus;
    corpus.statements = std::move(statements);
    for (std::size_t i = 0; i < corpus.statements.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%06zu", i + 1);
        corpus.statements[i].id = buf;
    }
    corpus.provenance = "synthetic seed=" + std::to_string(seed) + " templates=v1";
    return corpus;
}

ValidationResult validate_statement(const Statement& s) {
    const auto a = parse_phrase_string(s.entity1);
    if (!a) {
        return {ValidationStatus::Mismatch,
                "entity1 does not parse as a number phrase: '" + s.entity1 + "'"};
    }
    const auto b = parse_phrase_string(s.entity2);
    if (!b) {
        return {ValidationStatus::Mismatch,
                "entity2 does not parse as a number phrase: '" + s.entity2 + "'"};
    }

    const std::vector<std::string> ws = text_words(s.text);
    if (!entity_present(ws, s.entity1)) {
        return {ValidationStatus::Mismatch, "entity1 not found in text"};
    }
    if (!entity_present(ws, s.entity2)) {
        return {ValidationStatus::Mismatch, "entity2 not found in text"};
    }

    if (s.relation == RelationLabel::SquareRoot) {
        if (square_root_holds(*a, *b)) return {ValidationStatus::Valid, ""};
        return {ValidationStatus::Mismatch,
                "square root relation does not hold between entities"};
    }
    if (s.relation == RelationLabel::Factorial) {
        if (factorial_holds(*a, *b)) return {ValidationStatus::Valid, ""};
        return {ValidationStatus::Mismatch,
                "factorial relation does not hold between entities"};
    }

    // Linear operators need a third number in the text as the witness.
    std::vector<std::int64_t> values;
    for (const auto& p : numeral::extract_number_phrases(s.text)) {
        values.push_back(p.value);
    }
    const auto drop_one = [&values](std::int64_t v) {
        const auto it = std::find(values.begin(), values.end(), v);
        if (it != values.end()) values.erase(it);
    };
    drop_one(*a);
    drop_one(*b);
    if (values.empty()) return {ValidationStatus::ValidUnwitnessed, ""};

    for (std::int64_t c : values) {
        if (relation_holds(s.relation, *a, *b, c)) {
            return {ValidationStatus::Valid, ""};
        }
    }
    return {ValidationStatus::Mismatch,
            "entities inconsistent with witnessed arithmetic"};
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(0, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    const auto rows = csv::parse(content);
    if (rows.empty()) throw SchemaError(1, "missing header");
    const std::vector<std::string> header = {"id", "text", "entity1", "entity2",
                                             "relation"};
    if (rows[0] != header) throw SchemaError(1, "bad header");

    Corpus corpus;
    corpus.provenance = path.string();
    std::unordered_set<std::string> ids;
    std::unordered_set<std::string> texts;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t rowno = r + 1;
        if (row.size() != 5) {
            throw SchemaError(rowno, "expected 5 fields, got " +
                                         std::to_string(row.size()));
        }
        Statement s;
        s.id = row[0];
        s.text = row[1];
        s.entity1 = row[2];
        s.entity2 = row[3];
        if (s.id.empty()) throw SchemaError(rowno, "empty id");
        if (!ids.insert(s.id).second) throw SchemaError(rowno, "duplicate id " + s.id);
        const auto rel = label_from_name(row[4]);
        if (!rel) throw SchemaError(rowno, "unknown relation '" + row[4] + "'");
        s.relation = *rel;
        if (!parse_phrase_string(s.entity1)) {
            throw SchemaError(rowno, "entity1 does not parse: '" + s.entity1 + "'");
        }
        if (!parse_phrase_string(s.entity2)) {
            throw SchemaError(rowno, "entity2 does not parse: '" + s.entity2 + "'");
        }
        const auto ws = text_words(s.text);
        if (!entity_present(ws, s.entity1) || !entity_present(ws, s.entity2)) {
            throw SchemaError(rowno, "entity phrase not present in text");
        }
        const std::string key = normalized_text(s.text);
        if (!texts.insert(key).second) {
            throw DuplicateText(rowno, "duplicate statement text");
        }
        corpus.statements.push_back(std::move(s));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "id,text,entity1,entity2,relation\n";
    for (const auto& s : corpus.statements) {
        out << csv::format_row(
            {s.id, s.text, s.entity1, s.entity2, std::string(label_name(s.relation))});
    }
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must be in (0,1)");
    }
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);

    const auto n_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(corpus.size())));

    Corpus train, test;
    train.provenance = corpus.provenance + " [train]";
    test.provenance = corpus.provenance + " [test]";
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train : test).statements.push_back(corpus.statements[order[i]]);
    }
    return {std::move(train), std::move(test)};
}

ClassFractions class_distribution(const Corpus& corpus) {
    if (corpus.empty()) throw EmptyCorpus("class_distribution of empty corpus");
    ClassFractions f{};
    for (const auto& s : corpus.statements) {
        f[static_cast<std::size_t>(s.relation)] += 1.0;
    }
    for (double& v : f) v /= static_cast<double>(corpus.size());
    return f;
}

std::string normalized_text(std::string_view text) {
    return preprocess::clean_text(text);
}

}  // namespace mathrel::data
