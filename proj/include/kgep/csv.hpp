#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace kgep::csv {

// RFC-4180 reader: comma separated, double-quote quoting, "" escapes a quote,
// quoted fields may span lines. Accepts both LF and CRLF record ends.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Next record, or nullopt at end of input. Throws std::runtime_error on an
    // unterminated quoted field.
    std::optional<std::vector<std::string>> next();

    // 1-based line on which the most recently returned record started.
    std::size_t line() const { return record_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

// Quotes the field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace kgep::csv
