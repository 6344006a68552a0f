#pragma once

// Line-delimited JSON helpers shared by every file format in the harness.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vleval {

struct JsonLine {
  size_t line_number = 0;  // 1-based physical line in the source file
  nlohmann::json value;
};

// Parses every non-blank line as one JSON object. Malformed lines raise
// InputError naming the file and line number.
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);
std::vector<JsonLine> parse_jsonl(std::string_view text, std::string_view source_name);

std::string read_text_file(const std::filesystem::path& path);

// Writes through a sibling temp file followed by rename, so readers never
// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Field accessors that report "<source>:<line>: ..." on absence or type error.
std::string require_string(const JsonLine& line, std::string_view key, std::string_view source);
std::vector<std::string> require_string_list(const JsonLine& line, std::string_view key,
                                             std::string_view source);
long long require_integer(const JsonLine& line, std::string_view key, std::string_view source);

}  // namespace vleval
