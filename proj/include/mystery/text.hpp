#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mystery::text {

/// Splits a UTF-8 string into code points, each kept as its own UTF-8 string.
/// Throws Error(syntax) on malformed input.
std::vector<std::string> code_points(std::string_view utf8);

bool is_valid_utf8(std::string_view utf8);

/// Lowercases ASCII and the Latin-1 supplement capitals (À..Þ, except ×).
/// Other code points pass through unchanged.
std::string fold_case(std::string_view utf8);

/// Splits on runs of ASCII whitespace.
std::vector<std::string> split_words(std::string_view line);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string_view trim(std::string_view s);

bool has_whitespace(std::string_view s);

/// FNV-1a, 64 bit. Used for stable content hashes in file headers.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace mystery::text
