#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hsprobe {

/// Canonical matching form: ASCII-lowercased, punctuation removed (joined,
/// not spaced), whitespace runs collapsed to single spaces, ends trimmed.
///
/// The punctuation table is fixed: all ASCII punctuation plus the common
/// Unicode dashes, quotes and the ellipsis (see text.cpp). Removing a dash
/// joins its neighbours: "A-B" -> "ab".
std::string normalize_text(std::string_view s);

/// normalize_text followed by a split on single spaces.
std::vector<std::string> normalized_tokens(std::string_view s);

/// True iff `needle` is a contiguous substring of `haystack`, both in
/// normalized form. Empty needles never match.
bool normalized_contains(std::string_view haystack, std::string_view needle);

}  // namespace hsprobe
