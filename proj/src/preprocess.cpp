#include "mathrel/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include "mathrel/numeral.hpp"
#include "mathrel/porter.hpp"

namespace mathrel::preprocess {

namespace {

constexpr const char* kStopwordsText =
#include "stopwords_en.inc"
    ;

constexpr const char* kLemmasText =
#include "lemmas_en.inc"
    ;

constexpr std::string_view kRemovalSet = "$%#*-.,;:!?'\"()";

bool is_removal_char(char c) {
    return kRemovalSet.find(c) != std::string_view::npos;
}

const std::unordered_map<std::string, std::string>& lemma_table() {
    static const auto table = [] {
        std::unordered_map<std::string, std::string> t;
        std::istringstream in(kLemmasText);
        std::string line;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;
            t.emplace(line.substr(0, tab), line.substr(tab + 1));
        }
        return t;
    }();
    return table;
}

bool is_lower_alpha(const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
        return c >= 'a' && c <= 'z';
    });
}

bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() &&
           w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

const std::unordered_set<std::string>& stopword_set() {
    static const auto set = [] {
        std::unordered_set<std::string> s;
        std::istringstream in(kStopwordsText);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) s.insert(line);
        }
        return s;
    }();
    return set;
}

std::size_t lemma_table_size() { return lemma_table().size(); }

std::string clean_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        if (is_removal_char(c) || std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens) {
    std::vector<bool> in_phrase(tokens.size(), false);
    for (const auto& p : numeral::find_number_phrases(tokens)) {
        for (std::size_t i = p.first; i <= p.last; ++i) in_phrase[i] = true;
    }
    const auto& stop = stopword_set();
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        const bool exempt = numeral::is_number_word(t) || in_phrase[i];
        if (!exempt && stop.count(t)) continue;
        out.push_back(t);
    }
    return out;
}

std::string lemmatize_token(const std::string& word) {
    const auto& table = lemma_table();
    if (auto it = table.find(word); it != table.end()) return it->second;

    // regular plural rule
    if (ends_with(word, "ies") && word.size() > 4) {
        return word.substr(0, word.size() - 3) + "y";
    }
    if (ends_with(word, "es") && word.size() > 3) {
        const std::string head = word.substr(0, word.size() - 2);
        if (ends_with(head, "o") || ends_with(head, "x") || ends_with(head, "z") ||
            ends_with(head, "ch") || ends_with(head, "sh") || ends_with(head, "ss")) {
            return head;
        }
    }
    if (ends_with(word, "s") && word.size() > 3 && !ends_with(word, "ss") &&
        !ends_with(word, "us") && !ends_with(word, "is")) {
        return word.substr(0, word.size() - 1);
    }
    return word;
}

std::string stem_token(const std::string& word) {
    if (!is_lower_alpha(word)) return word;
    return porter::stem(word);
}

TokenStream preprocess_pipeline(std::string_view text) {
    TokenStream stream;
    stream.source_text = std::string(text);

    // Character-level cleaning that keeps offsets: removal chars become
    // spaces in place, so token positions still index into the raw text.
    std::string mapped;
    mapped.reserve(text.size());
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        mapped.push_back(is_removal_char(c) ? ' '
                                            : static_cast<char>(std::tolower(uc)));
    }

    std::vector<std::string> tokens;
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < mapped.size()) {
        if (std::isspace(static_cast<unsigned char>(mapped[i]))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < mapped.size() &&
               !std::isspace(static_cast<unsigned char>(mapped[i]))) {
            ++i;
        }
        tokens.push_back(mapped.substr(start, i - start));
        spans.push_back({start, i});
    }

    std::vector<bool> in_phrase(tokens.size(), false);
    for (const auto& p : numeral::find_number_phrases(tokens)) {
        for (std::size_t k = p.first; k <= p.last; ++k) in_phrase[k] = true;
    }

    const auto& stop = stopword_set();
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        std::string t = tokens[k];
        const bool exempt = numeral::is_number_word(t) || in_phrase[k];
        if (!exempt && stop.count(t)) continue;
        if (!in_phrase[k]) {
            t = lemmatize_token(t);
            t = stem_token(t);
        }
        stream.tokens.push_back(std::move(t));
        stream.spans.push_back(spans[k]);
        stream.in_number_phrase.push_back(in_phrase[k]);
    }
    return stream;
}

}  // namespace mathrel::preprocess
