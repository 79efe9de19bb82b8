#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace survey::util {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Lowercased alphanumeric runs; everything else is a separator.
std::vector<std::string> tokenize(std::string_view text);

// Lowercase, punctuation stripped, whitespace collapsed. Dedup key for titles.
std::string normalized_title(std::string_view title);

bool contains(std::string_view haystack, std::string_view needle);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Sentence segmentation: breaks after . ! ? followed by whitespace/EOL.
// Deterministic; keeps trailing citation brackets with their sentence.
std::vector<std::string> split_sentences(std::string_view text);

// Bracketed citation keys like [d12], in order of appearance (duplicates kept).
std::vector<std::string> extract_citation_keys(std::string_view text);

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t& state);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace survey::util
