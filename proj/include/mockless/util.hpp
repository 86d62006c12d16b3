#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mockless {

/// Raised for unusable configuration (missing tables, backends, bad flags).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an external tool (build backend, model endpoint) fails hard.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace util {

std::vector<std::string> split(std::string_view text, char sep, bool keep_empty = false);
std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string to_lower(std::string_view text);
bool starts_with(std::string_view text, std::string_view prefix);
bool ends_with(std::string_view text, std::string_view suffix);
std::string replace_all(std::string text, std::string_view from, std::string_view to);

/// Last dot-separated component ("a.b.C" -> "C").
std::string last_component(std::string_view dotted);
/// Everything before the last dot ("a.b.C" -> "a.b"), empty if none.
std::string strip_last_component(std::string_view dotted);

/// 64-bit FNV-1a. Stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::size_t levenshtein(std::string_view a, std::string_view b);
/// 1 - distance / max(len). Two empty strings are identical (1.0).
double normalized_similarity(std::string_view a, std::string_view b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Prefixes every line with its 1-based number, right-aligned.
std::string number_lines(std::string_view source, int first_line = 1);

}  // namespace util
}  // namespace mockless
