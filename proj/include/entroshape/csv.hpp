#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace entroshape::csv {

/// Shortest decimal representation that round-trips to the same double.
std::string format(double value);

/// Splits one CSV line on commas (no quoting; all our tables are numeric).
std::vector<std::string_view> split(std::string_view line);

/// Parses a full numeric field; throws InputError on trailing garbage.
double parse_double(std::string_view field);
unsigned long long parse_uint(std::string_view field);

}  // namespace entroshape::csv
