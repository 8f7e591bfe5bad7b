#pragma once

#include <string>
#include <vector>

namespace cde::csv {

// Split one delimited line. No quoting support; inputs are numeric tables.
std::vector<std::string> split(const std::string& line, char delim);

// Parse a floating point cell. Throws std::invalid_argument on garbage.
double parse_double(const std::string& cell, const std::string& context);

// true for empty cells and the literal NA token
bool is_missing(const std::string& cell);

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

void write_table(const std::string& path, char delim,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);

}  // namespace cde::csv
