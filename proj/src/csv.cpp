#include "kgep/csv.hpp"

#include <stdexcept>

namespace kgep::csv {

std::optional<std::vector<std::string>> Reader::next() {
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) return std::nullopt;

    record_line_ = line_;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;

    for (;; c = in_.get()) {
        if (c == std::char_traits<char>::eof()) {
            if (in_quotes) {
                throw std::runtime_error("unterminated quoted field starting on line " +
                                         std::to_string(record_line_));
            }
            fields.push_back(std::move(field));
            return fields;
        }
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_;
                field.push_back(ch);
            }
            continue;
        }
        switch (ch) {
        case '"':
            if (field.empty() && !was_quoted) {
                in_quotes = true;
                was_quoted = true;
            } else {
                field.push_back(ch);
            }
            break;
        case ',':
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
            break;
        case '\r':
            if (in_.peek() == '\n') break;
            field.push_back(ch);
            break;
        case '\n':
            ++line_;
            fields.push_back(std::move(field));
            return fields;
        default:
            field.push_back(ch);
        }
    }
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

}  // namespace kgep::csv
