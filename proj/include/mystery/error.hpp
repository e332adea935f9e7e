#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mystery {

enum class ErrorCode {
    syntax,
    unknown_label,
    structure,
    invalid_argument,
    empty_corpus,
    capacity,
    alphabet_too_small,
    missing_mapping,
    unknown_token,
    deck_too_large,
    inadmissible_token,
    inconsistent_root,
    generation_failed,
    layout_mismatch,
    not_found,
    unauthorized,
    forbidden,
    wrong_phase,
    conflict,
    io,
};

std::string_view error_code_name(ErrorCode code);

/// Base error for every domain failure raised by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by text-format readers; line and column are 1-based.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t line, std::size_t column, const std::string& message)
        : Error(code, std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace mystery
