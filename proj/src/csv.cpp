#include "cde/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cde::csv {

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  // strip trailing carriage return from DOS line endings
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA";
}

double parse_double(const std::string& cell, const std::string& context) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  while (ptr != last && (*ptr == ' ' || *ptr == '\t')) ++ptr;
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("non-numeric cell '" + cell + "' in " +
                                context);
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // prefer the shortest form that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    double back = 0.0;
    std::from_chars(shorter, shorter + std::char_traits<char>::length(shorter),
                    back);
    if (back == v) return shorter;
  }
  return buf;
}

void write_table(const std::string& path, char delim,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << delim;
    out << header[j];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << delim;
      out << row[j];
    }
    out << '\n';
  }
}

}  // namespace cde::csv
