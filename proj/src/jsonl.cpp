#include "vleval/jsonl.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "vleval/errors.hpp"

namespace vleval {

namespace {

std::string location(std::string_view source, size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

const nlohmann::json& require_field(const JsonLine& line, std::string_view key,
                                    std::string_view source) {
  auto it = line.value.find(std::string(key));
  if (it == line.value.end()) {
    throw InputError(location(source, line.line_number) + ": missing field \"" +
                     std::string(key) + "\"");
  }
  return *it;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<JsonLine> parse_jsonl(std::string_view text, std::string_view source_name) {
  std::vector<JsonLine> out;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (is_blank(line)) continue;
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(location(source_name, line_no) + ": malformed record: " + e.what());
    }
    if (!value.is_object()) {
      throw InputError(location(source_name, line_no) + ": malformed record: not a JSON object");
    }
    out.push_back({line_no, std::move(value)});
  }
  return out;
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_text_file(path), path.string());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
         "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string require_string(const JsonLine& line, std::string_view key, std::string_view source) {
  const auto& v = require_field(line, key, source);
  if (!v.is_string()) {
    throw InputError(location(source, line.line_number) + ": field \"" + std::string(key) +
                     "\" must be a string");
  }
  return v.get<std::string>();
}

std::vector<std::string> require_string_list(const JsonLine& line, std::string_view key,
                                             std::string_view source) {
  const auto& v = require_field(line, key, source);
  if (!v.is_array()) {
    throw InputError(location(source, line.line_number) + ": field \"" + std::string(key) +
                     "\" must be a list of strings");
  }
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) {
      throw InputError(location(source, line.line_number) + ": field \"" + std::string(key) +
                       "\" must be a list of strings");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

long long require_integer(const JsonLine& line, std::string_view key, std::string_view source) {
  const auto& v = require_field(line, key, source);
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d)) return static_cast<long long>(d);
  }
  throw InputError(location(source, line.line_number) + ": field \"" + std::string(key) +
                   "\" must be an integer");
}

}  // namespace vleval
