#include "caimira/matching.hpp"

#include <algorithm>
#include <vector>

#include "caimira/dataset.hpp"
#include "caimira/error.hpp"

namespace caimira {

void MatchConfig::validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("match threshold must lie in [0, 1]");
    }
}

std::u32string decode_utf8(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        int extra = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            cp = b0 & 0x1F;
            extra = 1;
        } else if ((b0 & 0xF0) == 0xE0) {
            cp = b0 & 0x0F;
            extra = 2;
        } else if ((b0 & 0xF8) == 0xF0) {
            cp = b0 & 0x07;
            extra = 3;
        } else {
            out.push_back(U'\uFFFD');
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k <= extra; ++k) {
            if (i + k >= text.size()) {
                ok = false;
                break;
            }
            const auto b = static_cast<unsigned char>(text[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            out.push_back(U'\uFFFD');
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(extra) + 1;
    }
    return out;
}

std::string encode_utf8(std::u32string_view text) {
    std::string out;
    for (char32_t cp : text) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

namespace {

using namespace std::string_view_literals;

// Base letters for U+00C0..U+00FF; '\0' marks entries handled elsewhere.
constexpr std::string_view kLatin1 =
    "AAAAAA\0CEEEEIIIIDNOOOOO\0OUUUUY\0\0aaaaaa\0ceeeeiiiidnooooo\0ouuuuy\0y"sv;
// Base letters for U+0100..U+017F; '?' marks ligatures handled elsewhere.
constexpr std::string_view kLatinExtA =
    "AaAaAaCcCcCcCcDdDdEeEeEeEeEeGgGgGgGgHhHhIiIiIiIiIi??JjKkkLlLlLlLlLlNnNnNnnNnOoOoOo??RrRrRrSsSsSsSsTtTtTtUuUuUuUuUuUuWwYyYZzZzZzs"sv;

bool is_combining_mark(char32_t cp) {
    return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0x1AB0 && cp <= 0x1AFF) || (cp >= 0x1DC0 && cp <= 0x1DFF) ||
           (cp >= 0x20D0 && cp <= 0x20FF) || (cp >= 0xFE20 && cp <= 0xFE2F);
}

void append_folded(char32_t cp, std::u32string& out) {
    if (is_combining_mark(cp)) return;
    if (cp >= 0xC0 && cp <= 0xFF) {
        switch (cp) {
            case 0xC6: out += U"AE"; return;
            case 0xE6: out += U"ae"; return;
            case 0xDE: out += U"TH"; return;
            case 0xFE: out += U"th"; return;
            case 0xDF: out += U"ss"; return;
            case 0xD7:
            case 0xF7: out.push_back(cp); return;
            default: break;
        }
        const char base = kLatin1[cp - 0xC0];
        out.push_back(base ? static_cast<char32_t>(base) : cp);
        return;
    }
    if (cp >= 0x100 && cp <= 0x17F) {
        switch (cp) {
            case 0x132: out += U"IJ"; return;
            case 0x133: out += U"ij"; return;
            case 0x152: out += U"OE"; return;
            case 0x153: out += U"oe"; return;
            default: break;
        }
        out.push_back(static_cast<char32_t>(kLatinExtA[cp - 0x100]));
        return;
    }
    out.push_back(cp);
}

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v' || cp == 0xA0 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x3000;
}

// Separators that read as word breaks become spaces; other punctuation is
// removed outright.
enum class PunctKind { None, Break, Drop };

PunctKind punctuation_kind(char32_t cp) {
    if (cp == U'-' || cp == U'/' || cp == U'_' || cp == 0x2010 || cp == 0x2011 || cp == 0x2012 || cp == 0x2013 ||
        cp == 0x2014 || cp == 0x2015) {
        return PunctKind::Break;
    }
    if (cp < 0x80) {
        const bool ascii_punct = (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
                                 (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
        return ascii_punct ? PunctKind::Drop : PunctKind::None;
    }
    if ((cp >= 0xA1 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7) return PunctKind::Drop;
    if (cp >= 0x2016 && cp <= 0x206F) return PunctKind::Drop;
    if (cp >= 0x3000 && cp <= 0x303F) return PunctKind::Drop;
    return PunctKind::None;
}

}  // namespace

std::u32string normalize_answer(std::string_view text, const MatchConfig& cfg) {
    const std::u32string decoded = decode_utf8(text);
    std::u32string folded;
    folded.reserve(decoded.size());
    for (char32_t cp : decoded) {
        if (cfg.strip_diacritics) {
            append_folded(cp, folded);
        } else {
            folded.push_back(cp);
        }
    }

    std::u32string cleaned;
    cleaned.reserve(folded.size());
    for (char32_t cp : folded) {
        if (cfg.lowercase && cp >= U'A' && cp <= U'Z') cp = cp - U'A' + U'a';
        if (cfg.strip_punctuation) {
            const PunctKind kind = punctuation_kind(cp);
            if (kind == PunctKind::Drop) continue;
            if (kind == PunctKind::Break) cp = U' ';
        }
        cleaned.push_back(is_space(cp) ? U' ' : cp);
    }

    std::u32string collapsed;
    collapsed.reserve(cleaned.size());
    for (char32_t cp : cleaned) {
        if (cp == U' ' && (collapsed.empty() || collapsed.back() == U' ')) continue;
        collapsed.push_back(cp);
    }
    if (!collapsed.empty() && collapsed.back() == U' ') collapsed.pop_back();

    if (cfg.strip_articles) {
        for (std::u32string_view article : {std::u32string_view(U"the "), std::u32string_view(U"an "),
                                            std::u32string_view(U"a ")}) {
            std::u32string_view head(collapsed);
            bool match = head.size() > article.size();
            for (std::size_t k = 0; match && k < article.size(); ++k) {
                char32_t c = head[k];
                if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
                match = c == article[k];
            }
            if (match) {
                collapsed.erase(0, article.size());
                break;
            }
        }
    }
    return collapsed;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double matching_rate(std::u32string_view a, std::u32string_view b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

MatchResult rule_answer(std::string_view prediction, const Question& gold, const MatchConfig& cfg) {
    const std::u32string pred = normalize_answer(prediction, cfg);
    double best = matching_rate(pred, normalize_answer(gold.answer, cfg));
    for (const auto& alias : gold.aliases) {
        best = std::max(best, matching_rate(pred, normalize_answer(alias, cfg)));
    }
    return {best >= cfg.threshold, best};
}

}  // namespace caimira
