#include "hsprobe/text.hpp"

#include <array>
#include <cctype>

namespace hsprobe {
namespace {

// Unicode punctuation removed alongside ASCII ispunct: dashes U+2010..U+2015,
// single/double quotes U+2018..U+201F, ellipsis U+2026, guillemets U+00AB/BB,
// and the modifier apostrophe U+02BC. Each entry is the UTF-8 byte sequence.
constexpr std::array<std::string_view, 18> kUnicodePunct = {
    "‐", "‑", "‒", "–", "—", "―",
    "‘", "’", "‚", "‛", "“", "”",
    "„", "‟", "…", "«", "»", "ʼ",
};

std::size_t unicode_punct_len(std::string_view rest) {
    for (auto p : kUnicodePunct)
        if (rest.substr(0, p.size()) == p) return p.size();
    return 0;
}

}  // namespace

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            if (std::isspace(c)) {
                pending_space = true;
                ++i;
                continue;
            }
            if (std::ispunct(c)) {  // punctuation joins neighbours
                ++i;
                continue;
            }
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
            ++i;
        } else {
            if (std::size_t n = unicode_punct_len(s.substr(i)); n > 0) {
                i += n;
                continue;
            }
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            // Pass other multi-byte sequences through unchanged.
            out.push_back(s[i]);
            ++i;
            while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80)
                out.push_back(s[i++]);
        }
    }
    return out;
}

std::vector<std::string> normalized_tokens(std::string_view s) {
    const std::string norm = normalize_text(s);
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start < norm.size()) {
        std::size_t end = norm.find(' ', start);
        if (end == std::string::npos) end = norm.size();
        if (end > start) tokens.push_back(norm.substr(start, end - start));
        start = end + 1;
    }
    return tokens;
}

bool normalized_contains(std::string_view haystack, std::string_view needle) {
    const std::string h = normalize_text(haystack);
    const std::string n = normalize_text(needle);
    if (n.empty()) return false;
    return h.find(n) != std::string::npos;
}

}  // namespace hsprobe
