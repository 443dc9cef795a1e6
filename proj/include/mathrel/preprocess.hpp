#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mathrel::preprocess {

// Character span of a token in the raw text it came from.
struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;
};

// The model-ready token sequence together with its provenance. `spans` and
// `in_number_phrase` are aligned with `tokens`; the span offsets point back
// into `source_text` so reports can highlight the original surface words.
struct TokenStream {
    std::vector<std::string> tokens;
    std::string source_text;
    std::vector<TokenSpan> spans;
    std::vector<bool> in_number_phrase;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }
};

// Replaces the removal set {$ % # * - . , ; : ! ? ' " ( )} with spaces,
// lowercases, collapses whitespace runs, and trims.
std::string clean_text(std::string_view text);

// Drops stopwords. Number words never count as stopwords; "and" is kept only
// where it sits inside a number phrase recognized in the token sequence.
std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens);

// Irregular-form table lookup, then a regular plural rule; unknown words pass
// through unchanged.
std::string lemmatize_token(const std::string& word);

// Porter stem. Words of length <= 2 or containing non-lowercase-alphabetic
// characters pass through unchanged.
std::string stem_token(const std::string& word);

// clean -> tokenize -> number-phrase marking -> stopwords -> lemma -> stem.
// Tokens inside number phrases skip lemmatization and stemming.
TokenStream preprocess_pipeline(std::string_view text);

// The embedded stopword list (read-only view, for tests and tooling).
const std::unordered_set<std::string>& stopword_set();

// The embedded irregular-form table size (for sanity checks).
std::size_t lemma_table_size();

}  // namespace mathrel::preprocess
