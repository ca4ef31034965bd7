#include "miscon/csv.hpp"

#include "miscon/errors.hpp"

namespace miscon {

CsvReader::CsvReader(std::istream& in, char delimiter) : in_(in), delimiter_(delimiter) {}

std::optional<std::vector<std::string>> CsvReader::next_row() {
    int first = in_.peek();
    if (first == std::istream::traits_type::eof()) return std::nullopt;

    if (first_row_) {
        first_row_ = false;
        // Strip a UTF-8 BOM if present.
        if (first == 0xEF) {
            char bom[3] = {};
            in_.read(bom, 3);
            if (!(in_.gcount() == 3 && bom[0] == '\xEF' && bom[1] == '\xBB' && bom[2] == '\xBF')) {
                for (int i = static_cast<int>(in_.gcount()) - 1; i >= 0; --i) in_.putback(bom[i]);
            }
            if (in_.peek() == std::istream::traits_type::eof()) return std::nullopt;
        }
    }

    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool saw_any = false;

    for (;;) {
        const int ci = in_.get();
        if (ci == std::istream::traits_type::eof()) {
            if (in_quotes) throw InputError("unterminated quoted CSV field at end of input");
            if (!saw_any && row.empty() && field.empty()) return std::nullopt;
            row.push_back(std::move(field));
            return row;
        }
        const char c = static_cast<char>(ci);
        saw_any = true;

        if (in_quotes) {
            if (c == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }

        if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == delimiter_) {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            return row;
        } else if (c == '\r' && in_.peek() == '\n') {
            in_.get();
            row.push_back(std::move(field));
            return row;
        } else {
            field.push_back(c);
        }
    }
}

}  // namespace miscon
