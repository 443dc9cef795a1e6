#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mathrel::csv {

struct ParseError : std::runtime_error {
    std::size_t row;
    ParseError(std::size_t row_, const std::string& what)
        : std::runtime_error(what), row(row_) {}
};

// RFC 4180: fields containing comma, quote, or newline are quoted; quotes
// escape as "".
std::string escape_field(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

// Parses a whole document into rows of fields. Accepts LF and CRLF endings
// and quoted fields spanning newlines. Row numbers in errors are 1-based.
std::vector<std::vector<std::string>> parse(std::string_view content);

}  // namespace mathrel::csv
