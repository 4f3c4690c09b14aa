#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace advlab {

// Shortest decimal form that parses back to the identical double, so CSV
// round-trips are bitwise lossless.
std::string format_double(double v);

bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

std::vector<std::string_view> split_fields(std::string_view line, char sep);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace advlab
