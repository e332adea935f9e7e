#include "mystery/text.hpp"

#include <cstdio>

#include "mystery/error.hpp"

namespace mystery {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::syntax: return "syntax";
    case ErrorCode::unknown_label: return "unknown_label";
    case ErrorCode::structure: return "structure";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::empty_corpus: return "empty_corpus";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::alphabet_too_small: return "alphabet_too_small";
    case ErrorCode::missing_mapping: return "missing_mapping";
    case ErrorCode::unknown_token: return "unknown_token";
    case ErrorCode::deck_too_large: return "deck_too_large";
    case ErrorCode::inadmissible_token: return "inadmissible_token";
    case ErrorCode::inconsistent_root: return "inconsistent_root";
    case ErrorCode::generation_failed: return "generation_failed";
    case ErrorCode::layout_mismatch: return "layout_mismatch";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::unauthorized: return "unauthorized";
    case ErrorCode::forbidden: return "forbidden";
    case ErrorCode::wrong_phase: return "wrong_phase";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io: return "io";
    }
    return "unknown";
}

namespace text {

namespace {

// Returns the byte length of the code point starting at s[i], or 0 if malformed.
std::size_t sequence_length(std::string_view s, std::size_t i) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0 && lead >= 0xC2) len = 2;
    else if ((lead & 0xF0) == 0xE0) len = 3;
    else if ((lead & 0xF8) == 0xF0 && lead <= 0xF4) len = 4;
    else return 0;
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 0;
    }
    return len;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

bool is_valid_utf8(std::string_view utf8) {
    for (std::size_t i = 0; i < utf8.size();) {
        const auto len = sequence_length(utf8, i);
        if (len == 0) return false;
        i += len;
    }
    return true;
}

std::vector<std::string> code_points(std::string_view utf8) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < utf8.size();) {
        const auto len = sequence_length(utf8, i);
        if (len == 0) {
            throw Error(ErrorCode::syntax, "malformed UTF-8 at byte " + std::to_string(i));
        }
        out.emplace_back(utf8.substr(i, len));
        i += len;
    }
    return out;
}

std::string fold_case(std::string_view utf8) {
    std::string out;
    out.reserve(utf8.size());
    for (std::size_t i = 0; i < utf8.size(); ++i) {
        const auto c = static_cast<unsigned char>(utf8[i]);
        if (c >= 'A' && c <= 'Z') {
            out.push_back(static_cast<char>(c + 32));
        } else if (c == 0xC3 && i + 1 < utf8.size()) {
            // U+00C0..U+00DE live at C3 80..C3 9E; lowercase is +0x20 on the
            // continuation byte, except U+00D7 (multiplication sign).
            const auto next = static_cast<unsigned char>(utf8[i + 1]);
            out.push_back(utf8[i]);
            if (next >= 0x80 && next <= 0x9E && next != 0x97) {
                out.push_back(static_cast<char>(next + 0x20));
            } else {
                out.push_back(utf8[i + 1]);
            }
            ++i;
        } else {
            out.push_back(utf8[i]);
        }
    }
    return out;
}

std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        const auto start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) out.emplace_back(line.substr(start, i - start));
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

bool has_whitespace(std::string_view s) {
    for (char c : s) {
        if (is_space(c)) return true;
    }
    return false;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace text
}  // namespace mystery
