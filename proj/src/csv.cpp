#include "countercast/csv.hpp"

#include <cstdio>
#include <istream>

#include "countercast/errors.hpp"

namespace ccast {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string field = line.substr(start, comma == std::string::npos ? comma : comma - start);
        // trim surrounding whitespace and a possible trailing CR
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ' || field.back() == '\t'))
            field.pop_back();
        std::size_t lead = 0;
        while (lead < field.size() && (field[lead] == ' ' || field[lead] == '\t')) ++lead;
        out.push_back(field.substr(lead));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

CsvReader::CsvReader(std::istream& in) : in_(in) {
    std::string line;
    if (!std::getline(in_, line)) throw SchemaError("empty input: missing header row");
    header_ = split_csv_line(line);
}

std::size_t CsvReader::require(const std::string& column) const {
    if (auto idx = find(column)) return *idx;
    throw SchemaError("missing required column: " + column);
}

std::optional<std::size_t> CsvReader::find(const std::string& column) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == column) return i;
    return std::nullopt;
}

bool CsvReader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        if (line.empty() || line == "\r") continue;
        fields = split_csv_line(line);
        return true;
    }
    return false;
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace ccast
