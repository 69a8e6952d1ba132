#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ccast {

/// Minimal comma-separated reader: UTF-8, header row, no quoting (the
/// formats this tool reads and writes never embed commas).
class CsvReader {
public:
    explicit CsvReader(std::istream& in);

    const std::vector<std::string>& header() const { return header_; }

    /// Index of a column. Throws SchemaError naming the column if required
    /// and absent; returns nullopt for optional columns.
    std::size_t require(const std::string& column) const;
    std::optional<std::size_t> find(const std::string& column) const;

    /// Reads the next row into `fields`; false at end of input.
    /// Rows with a field count different from the header are returned as-is;
    /// callers decide whether that is an error or a dropped row.
    bool next(std::vector<std::string>& fields);

private:
    std::istream& in_;
    std::vector<std::string> header_;
};

std::vector<std::string> split_csv_line(const std::string& line);

/// Formats a double with enough digits to round-trip, without trailing
/// noise ("%.12g"). Deterministic across runs.
std::string format_number(double v);

}  // namespace ccast
