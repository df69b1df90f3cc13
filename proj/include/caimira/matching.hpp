#pragma once

#include <string>
#include <string_view>

namespace caimira {

struct Question;

// Answer equivalence settings. Normalization runs before the character
// matching rate is computed.
struct MatchConfig {
    double threshold = 0.75;
    bool lowercase = true;
    bool strip_punctuation = true;
    bool strip_diacritics = true;
    bool strip_articles = true;

    void validate() const;
};

struct MatchResult {
    bool correct = false;
    double similarity = 0.0;
};

// Decodes UTF-8 (invalid bytes become U+FFFD).
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

std::u32string normalize_answer(std::string_view text, const MatchConfig& cfg);

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

// 1 - levenshtein / max length over code points; 1 when both are empty.
double matching_rate(std::u32string_view a, std::u32string_view b);

// Best matching rate of the normalized prediction against the answer and
// every alias.
MatchResult rule_answer(std::string_view prediction, const Question& gold, const MatchConfig& cfg);

}  // namespace caimira
