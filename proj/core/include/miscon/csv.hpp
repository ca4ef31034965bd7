#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace miscon {

/// RFC4180-style reader: quoted fields, doubled-quote escapes, embedded
/// delimiters and newlines inside quotes, LF or CRLF row endings, optional
/// UTF-8 BOM. Delimiter is configurable.
class CsvReader {
public:
    explicit CsvReader(std::istream& in, char delimiter = ',');

    /// Next row, or nullopt at end of input. Throws InputError on an
    /// unterminated quoted field.
    std::optional<std::vector<std::string>> next_row();

private:
    std::istream& in_;
    char delimiter_;
    bool first_row_ = true;
};

}  // namespace miscon
