#pragma once

#include <string>
#include <vector>

#include "rippler/errors.hpp"

namespace rippler {

/// Tab-separated table with one header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // ParseError if absent
};

Table read_table(const std::string& path);

long parse_long(const std::string& s, const std::string& context);
double parse_double(const std::string& s, const std::string& context);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Run-length codec for integer sequences: "12*3,0*7,4" (single values may
/// omit the count).
std::string rle_encode(const std::vector<int>& values);
std::vector<int> rle_decode(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace rippler
