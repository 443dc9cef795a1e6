#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mathrel::numeral {

// Largest value the short-scale grammar covers (units through "million").
inline constexpr std::int64_t kMaxValue = 999'999'999;

struct MalformedNumeral : std::runtime_error {
    explicit MalformedNumeral(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfRange : std::runtime_error {
    explicit OutOfRange(const std::string& what) : std::runtime_error(what) {}
};

// A number phrase located in raw text. The substring at [span_start, span_end)
// normalizes (lowercase, hyphens to spaces, optional "and" dropped) to `words`.
struct NumberPhrase {
    std::size_t span_start = 0;
    std::size_t span_end = 0;
    std::vector<std::string> words;
    std::int64_t value = 0;
};

// True for members of the numeral vocabulary ("zero".."ninety", "hundred",
// "thousand", "million"). "and" is not included; it is only a connective.
bool is_number_word(std::string_view word);

// Parses a sequence of lowercase number words ("five","thousand","and","forty")
// to its integer value. Hyphenated compounds must be pre-split. Throws
// MalformedNumeral when the sequence violates the grammar.
std::int64_t parse_number_phrase(const std::vector<std::string>& words);

// Canonical short-scale rendering without "and": 5040 -> "five thousand forty".
// Inverse of parse_number_phrase. Throws OutOfRange for n outside [0, kMaxValue].
std::vector<std::string> render_number_words(std::int64_t n);

// Finds maximal, non-overlapping number phrases in raw text, left to right.
// Greedy-longest matching; digit literals count as single-token phrases.
std::vector<NumberPhrase> extract_number_phrases(std::string_view text);

// Same matching over an already-tokenized lowercase word sequence; phrases
// cover token indices [first, last] inclusive.
struct WordRangePhrase {
    std::size_t first = 0;
    std::size_t last = 0;
    std::vector<std::string> words;
    std::int64_t value = 0;
};
std::vector<WordRangePhrase> find_number_phrases(const std::vector<std::string>& tokens);

}  // namespace mathrel::numeral
