#include "mathrel/numeral.hpp"

#include <array>
#include <cctype>
#include <optional>
#include <unordered_map>

namespace mathrel::numeral {

namespace {

enum class TokKind { Zero, Unit, Teen, Tens, Hundred, Scale, And };

struct Tok {
    TokKind kind;
    std::int64_t value;  // units/teens/tens: face value; Scale: multiplier
};

const std::unordered_map<std::string_view, Tok>& token_table() {
    static const std::unordered_map<std::string_view, Tok> table = {
        {"zero", {TokKind::Zero, 0}},      {"one", {TokKind::Unit, 1}},
        {"two", {TokKind::Unit, 2}},       {"three", {TokKind::Unit, 3}},
        {"four", {TokKind::Unit, 4}},      {"five", {TokKind::Unit, 5}},
        {"six", {TokKind::Unit, 6}},       {"seven", {TokKind::Unit, 7}},
        {"eight", {TokKind::Unit, 8}},     {"nine", {TokKind::Unit, 9}},
        {"ten", {TokKind::Teen, 10}},      {"eleven", {TokKind::Teen, 11}},
        {"twelve", {TokKind::Teen, 12}},   {"thirteen", {TokKind::Teen, 13}},
        {"fourteen", {TokKind::Teen, 14}}, {"fifteen", {TokKind::Teen, 15}},
        {"sixteen", {TokKind::Teen, 16}},  {"seventeen", {TokKind::Teen, 17}},
        {"eighteen", {TokKind::Teen, 18}}, {"nineteen", {TokKind::Teen, 19}},
        {"twenty", {TokKind::Tens, 20}},   {"thirty", {TokKind::Tens, 30}},
        {"forty", {TokKind::Tens, 40}},    {"fifty", {TokKind::Tens, 50}},
        {"sixty", {TokKind::Tens, 60}},    {"seventy", {TokKind::Tens, 70}},
        {"eighty", {TokKind::Tens, 80}},   {"ninety", {TokKind::Tens, 90}},
        {"hundred", {TokKind::Hundred, 100}},
        {"thousand", {TokKind::Scale, 1'000}},
        {"million", {TokKind::Scale, 1'000'000}},
        {"and", {TokKind::And, 0}},
    };
    return table;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

std::optional<std::int64_t> parse_digit_literal(std::string_view s) {
    if (!all_digits(s) || s.size() > 10) return std::nullopt;
    std::int64_t v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    if (v > kMaxValue) return std::nullopt;
    return v;
}

}  // namespace

bool is_number_word(std::string_view word) {
    auto it = token_table().find(word);
    return it != token_table().end() && it->second.kind != TokKind::And;
}

std::int64_t parse_number_phrase(const std::vector<std::string>& words) {
    if (words.empty()) throw MalformedNumeral("empty number phrase");

    // A lone digit literal ("36") denotes itself.
    if (words.size() == 1) {
        if (auto v = parse_digit_literal(words[0])) return *v;
        if (words[0] == "zero") return 0;
    }

    std::int64_t total = 0;
    std::int64_t hundreds = 0, tens = 0, unit = 0;
    bool teen = false;        // tens slot holds a teen (blocks a trailing unit)
    bool group_open = false;  // current sub-thousand group has content
    std::int64_t last_scale = kMaxValue + 1;
    bool pending_and = false;
    bool and_position = false;  // "and" may only follow hundred/thousand/million

    const auto group_value = [&] { return hundreds + tens + unit; };

    for (const std::string& w : words) {
        auto it = token_table().find(w);
        if (it == token_table().end()) {
            throw MalformedNumeral("not a number word: '" + w + "'");
        }
        const Tok tok = it->second;
        switch (tok.kind) {
            case TokKind::Zero:
                throw MalformedNumeral("'zero' cannot combine with other words");
            case TokKind::And:
                if (!and_position || pending_and) {
                    throw MalformedNumeral("misplaced 'and'");
                }
                pending_and = true;
                break;
            case TokKind::Unit:
                if (teen || unit != 0) {
                    throw MalformedNumeral("unit '" + w + "' cannot follow the current group");
                }
                unit = tok.value;
                group_open = true;
                pending_and = false;
                and_position = false;
                break;
            case TokKind::Teen:
            case TokKind::Tens:
                if (teen || tens != 0 || unit != 0) {
                    throw MalformedNumeral("'" + w + "' cannot follow the current group");
                }
                tens = tok.value;
                teen = (tok.kind == TokKind::Teen);
                group_open = true;
                pending_and = false;
                and_position = false;
                break;
            case TokKind::Hundred:
                if (pending_and || teen || tens != 0 || unit == 0 || hundreds != 0) {
                    throw MalformedNumeral("'hundred' needs a single leading unit");
                }
                hundreds = unit * 100;
                unit = 0;
                and_position = true;
                break;
            case TokKind::Scale:
                if (pending_and || !group_open || group_value() == 0) {
                    throw MalformedNumeral("'" + w + "' has no multiplicand");
                }
                if (tok.value >= last_scale) {
                    throw MalformedNumeral("scale '" + w + "' out of descending order");
                }
                total += group_value() * tok.value;
                hundreds = tens = unit = 0;
                teen = false;
                group_open = false;
                last_scale = tok.value;
                and_position = true;
                break;
        }
    }
    if (pending_and) throw MalformedNumeral("trailing 'and'");
    return total + group_value();
}

std::vector<std::string> render_number_words(std::int64_t n) {
    if (n < 0 || n > kMaxValue) {
        throw OutOfRange("value out of numeral range: " + std::to_string(n));
    }
    if (n == 0) return {"zero"};

    static constexpr std::array<const char*, 20> small = {
        "zero",    "one",     "two",       "three",    "four",
        "five",    "six",     "seven",     "eight",    "nine",
        "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
        "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
    static constexpr std::array<const char*, 10> tens_words = {
        "",      "",      "twenty",  "thirty", "forty",
        "fifty", "sixty", "seventy", "eighty", "ninety"};

    std::vector<std::string> out;
    const auto render_group = [&](std::int64_t g) {
        if (g >= 100) {
            out.emplace_back(small[static_cast<std::size_t>(g / 100)]);
            out.emplace_back("hundred");
            g %= 100;
        }
        if (g >= 20) {
            out.emplace_back(tens_words[static_cast<std::size_t>(g / 10)]);
            g %= 10;
        }
        if (g > 0) out.emplace_back(small[static_cast<std::size_t>(g)]);
    };

    if (n >= 1'000'000) {
        render_group(n / 1'000'000);
        out.emplace_back("million");
        n %= 1'000'000;
    }
    if (n >= 1'000) {
        render_group(n / 1'000);
        out.emplace_back("thousand");
        n %= 1'000;
    }
    render_group(n);
    return out;
}

namespace {

struct RawToken {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string lower;
    bool digits = false;
};

std::vector<RawToken> tokenize_with_offsets(std::string_view text) {
    std::vector<RawToken> toks;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isalpha(c)) {
            RawToken t;
            t.start = i;
            while (i < text.size() &&
                   std::isalpha(static_cast<unsigned char>(text[i]))) {
                t.lower.push_back(static_cast<char>(
                    std::tolower(static_cast<unsigned char>(text[i]))));
                ++i;
            }
            t.end = i;
            toks.push_back(std::move(t));
        } else if (std::isdigit(c)) {
            RawToken t;
            t.start = i;
            t.digits = true;
            while (i < text.size() &&
                   std::isdigit(static_cast<unsigned char>(text[i]))) {
                t.lower.push_back(text[i]);
                ++i;
            }
            t.end = i;
            toks.push_back(std::move(t));
        } else {
            ++i;
        }
    }
    return toks;
}

bool parses(const std::vector<std::string>& words) {
    try {
        parse_number_phrase(words);
        return true;
    } catch (const MalformedNumeral&) {
        return false;
    }
}

}  // namespace

std::vector<WordRangePhrase> find_number_phrases(const std::vector<std::string>& tokens) {
    std::vector<WordRangePhrase> phrases;

    std::size_t i = 0;
    while (i < tokens.size()) {
        const std::string& t = tokens[i];
        if (all_digits(t)) {
            if (auto v = parse_digit_literal(t)) {
                phrases.push_back({i, i, {t}, *v});
            }
            ++i;
            continue;
        }
        if (!is_number_word(t)) {
            ++i;
            continue;
        }
        std::vector<std::string> cur = {t};
        if (!parses(cur)) {  // bare "hundred"/"thousand" cannot start a phrase
            ++i;
            continue;
        }
        std::size_t last = i;
        std::size_t j = i + 1;
        while (j < tokens.size()) {
            const std::string& nt = tokens[j];
            if (all_digits(nt)) break;
            if (nt == "and") {
                // keep the "and" only when the word after it continues the phrase
                if (j + 1 >= tokens.size() || all_digits(tokens[j + 1])) break;
                std::vector<std::string> ext = cur;
                ext.emplace_back("and");
                ext.push_back(tokens[j + 1]);
                if (!parses(ext)) break;
                cur = std::move(ext);
                last = j + 1;
                j += 2;
                continue;
            }
            if (!is_number_word(nt)) break;
            std::vector<std::string> ext = cur;
            ext.push_back(nt);
            if (!parses(ext)) break;
            cur = std::move(ext);
            last = j;
            ++j;
        }
        WordRangePhrase p;
        p.first = i;
        p.last = last;
        p.value = parse_number_phrase(cur);
        for (std::string& w : cur) {
            if (w != "and") p.words.push_back(std::move(w));
        }
        phrases.push_back(std::move(p));
        i = last + 1;
    }
    return phrases;
}

std::vector<NumberPhrase> extract_number_phrases(std::string_view text) {
    const std::vector<RawToken> toks = tokenize_with_offsets(text);
    std::vector<std::string> words;
    words.reserve(toks.size());
    for (const RawToken& t : toks) words.push_back(t.lower);

    std::vector<NumberPhrase> phrases;
    for (WordRangePhrase& wp : find_number_phrases(words)) {
        NumberPhrase p;
        p.span_start = toks[wp.first].start;
        p.span_end = toks[wp.last].end;
        p.words = std::move(wp.words);
        p.value = wp.value;
        phrases.push_back(std::move(p));
    }
    return phrases;
}

}  // namespace mathrel::numeral
