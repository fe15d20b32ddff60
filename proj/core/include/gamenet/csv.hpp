#pragma once

#include "gamenet/matrix.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gamenet::csv {

/// RFC 4180 style record reader: quoted fields may contain delimiters,
/// doubled quotes and newlines. CRLF line endings are accepted.
class Reader {
public:
    Reader(std::istream& in, char delimiter);

    /// Reads the next record; false at end of input.
    bool next(std::vector<std::string>& fields);
    /// 1-based line number where the last record started.
    std::size_t line() const noexcept { return record_line_; }

private:
    std::istream& in_;
    char delim_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

/// Tab if the header line contains a tab, comma otherwise.
char detect_delimiter(std::string_view header_line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Throws DataError if the column is absent.
    std::size_t column(std::string_view name) const;
};

/// Reads a headed table. delimiter 0 means auto-detect. Throws InputError if
/// the file cannot be opened and DataError on ragged rows.
Table read_table(const std::filesystem::path& path, char delimiter = 0);
Table read_table(std::istream& in, char delimiter = 0);

std::string quote_field(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, std::span<const std::string> fields, char delimiter = ',');
void write_table(const std::filesystem::path& path, const Table& table);

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Numeric matrix keyed by an id column.
struct KeyedMatrix {
    std::string key_name = "track_id";
    std::vector<std::string> ids;
    std::vector<std::string> columns;
    Matrix values;
};

KeyedMatrix read_keyed_matrix(const std::filesystem::path& path, std::string_view key = "track_id");
void write_keyed_matrix(const std::filesystem::path& path, const KeyedMatrix& m);

} // namespace gamenet::csv
