#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace avua {

using Json = nlohmann::json;

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool icontains(std::string_view haystack, std::string_view needle);

// Replaces every "{key}" in `text` with the mapped value. Unknown
// placeholders are left untouched.
std::string substitute(std::string text,
                       const std::vector<std::pair<std::string, std::string>>& values);

// Formats a real with at most `decimals` places and no trailing zeros.
std::string format_real(double value, int decimals = 2);

// Keeps at most `max_chars` trailing characters, prefixing a marker when cut.
std::string tail_truncate(std::string_view text, std::size_t max_chars);
std::string head_truncate(std::string_view text, std::size_t max_chars);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<Json> read_json_lines(const std::string& path);

}  // namespace avua
