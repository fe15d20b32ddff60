#include "gamenet/csv.hpp"

#include "gamenet/error.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace gamenet::csv {

Reader::Reader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

bool Reader::next(std::vector<std::string>& fields)
{
    fields.clear();
    int c = in_.peek();
    if (c == std::char_traits<char>::eof())
        return false;
    record_line_ = line_;
    std::string field;
    bool quoted = false;
    bool any = false;
    while (true) {
        c = in_.get();
        if (c == std::char_traits<char>::eof()) {
            if (quoted)
                throw DataError("unterminated quoted field starting on line " +
                                std::to_string(record_line_));
            if (any || !field.empty() || !fields.empty())
                fields.push_back(std::move(field));
            return !fields.empty();
        }
        any = true;
        const char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n')
                    ++line_;
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == delim_) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch == '\r' && in_.peek() == '\n') {
            continue;
        } else if (ch == '\n') {
            ++line_;
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(ch);
        }
    }
}

char detect_delimiter(std::string_view header_line)
{
    return header_line.find('\t') != std::string_view::npos ? '\t' : ',';
}

std::optional<std::size_t> Table::find_column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    return std::nullopt;
}

std::size_t Table::column(std::string_view name) const
{
    if (auto i = find_column(name))
        return *i;
    throw DataError("missing column '" + std::string(name) + "'");
}

Table read_table(std::istream& in, char delimiter)
{
    if (delimiter == 0) {
        std::string first;
        const auto pos = in.tellg();
        std::getline(in, first);
        in.clear();
        in.seekg(pos);
        delimiter = detect_delimiter(first);
    }
    Reader reader(in, delimiter);
    Table t;
    if (!reader.next(t.header))
        throw DataError("empty table (no header row)");
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && fields[0].empty())
            continue;
        if (fields.size() != t.header.size())
            throw DataError("line " + std::to_string(reader.line()) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        t.rows.push_back(fields);
    }
    return t;
}

Table read_table(const std::filesystem::path& path, char delimiter)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot read " + path.string());
    try {
        return read_table(in, delimiter);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string quote_field(std::string_view field, char delimiter)
{
    const bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
    if (!needs)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, std::span<const std::string> fields, char delimiter)
{
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0)
            out.put(delimiter);
        out << quote_field(fields[i], delimiter);
    }
    out.put('\n');
}

void write_table(const std::filesystem::path& path, const Table& table)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    write_row(out, table.header);
    for (const auto& r : table.rows)
        write_row(out, r);
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '+'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r'))
        text.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw DataError("not a number: '" + std::string(text) + "'");
    return v;
}

long long parse_int(std::string_view text)
{
    while (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r'))
        text.remove_suffix(1);
    long long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw DataError("not an integer: '" + std::string(text) + "'");
    return v;
}

KeyedMatrix read_keyed_matrix(const std::filesystem::path& path, std::string_view key)
{
    const Table t = read_table(path);
    KeyedMatrix m;
    m.key_name = std::string(key);
    const std::size_t key_col = t.column(key);
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (c != key_col)
            m.columns.push_back(t.header[c]);
    m.values = Matrix(t.rows.size(), m.columns.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        m.ids.push_back(t.rows[r][key_col]);
        std::size_t out_c = 0;
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            if (c == key_col)
                continue;
            try {
                m.values(r, out_c++) = parse_double(t.rows[r][c]);
            } catch (const DataError& e) {
                throw DataError(path.string() + " row " + std::to_string(r + 2) + ": " + e.what());
            }
        }
    }
    return m;
}

void write_keyed_matrix(const std::filesystem::path& path, const KeyedMatrix& m)
{
    if (m.ids.size() != m.values.rows() || m.columns.size() != m.values.cols())
        throw ShapeError("write_keyed_matrix: ids/columns do not match values");
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    std::vector<std::string> row;
    row.push_back(m.key_name);
    row.insert(row.end(), m.columns.begin(), m.columns.end());
    write_row(out, row);
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        row.clear();
        row.push_back(m.ids[r]);
        for (double v : m.values.row(r))
            row.push_back(format_double(v));
        write_row(out, row);
    }
}

} // namespace gamenet::csv
