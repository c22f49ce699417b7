#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uld::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Fixed-point with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

/// Whole-string parse; rejects trailing garbage, empty input and non-finite values.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// Parses "a,b,c" (or another separator) into doubles; nullopt on any bad field.
std::optional<std::vector<double>> parse_double_list(std::string_view s, char sep = ',');

}  // namespace uld::text
