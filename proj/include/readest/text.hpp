#pragma once

#include <string>
#include <string_view>

namespace readest {

// Shortest decimal text that parses back to exactly `v` (integral values
// print without a fraction, e.g. 2.0 -> "2").
std::string format_number(double v);

// Strict full-string parse; throws std::invalid_argument on junk.
double parse_number(std::string_view s);

// JSON string literal with escaping, including the surrounding quotes.
std::string json_quote(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace readest
