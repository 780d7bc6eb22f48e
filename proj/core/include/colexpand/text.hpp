#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small ASCII string helpers shared across modules. Bytes >= 0x80 are passed
// through untouched so UTF-8 input survives every transformation.
namespace colexpand::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
// Trims and replaces every run of whitespace with a single space.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, std::string_view separator);
std::string join(const std::vector<std::string>& parts, std::string_view separator);
// Comparison form used by the metrics and the synonym lexicon: lowercase,
// drop ASCII characters other than letters, digits and whitespace, then
// collapse whitespace. "Day-Time Phone" -> "daytime phone".
std::string normalize_phrase(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool is_all_digits(std::string_view s);

// 64-bit FNV-1a. Stable across platforms; used for seeds and feature hashing.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Lowercase hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view s);

}  // namespace colexpand::text
