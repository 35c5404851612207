#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace infoneed {

using Json = nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never see a
/// half-written file.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Calls `fn(line, line_number)` for every line (1-based, LF or CRLF).
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

/// Parses a JSONL file, skipping blank lines. Malformed lines raise
/// ParseError with the line number.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& rows);

std::vector<std::string_view> split(std::string_view s, char sep);
/// Splits on runs of spaces/tabs.
std::vector<std::string_view> split_whitespace(std::string_view s);

}  // namespace infoneed
