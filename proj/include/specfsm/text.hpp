#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace specfsm::text {

bool is_space(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// Whitespace-token count; the word measure used for every budget.
std::size_t word_count(std::string_view s) noexcept;

std::vector<std::string_view> split_words(std::string_view s);

/// Trims and collapses every whitespace run to one ASCII space.
std::string normalize_whitespace(std::string_view s);

/// Whitespace-normalized substring test used for grounding checks.
bool contains_normalized(std::string_view haystack, std::string_view needle);

std::string to_upper_ascii(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Keeps at most `max_words` leading whitespace tokens, joined by single spaces.
std::string truncate_words(std::string_view s, std::size_t max_words);

/// Splits on '\n'; a trailing newline does not produce an empty final line.
std::vector<std::string_view> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string sha256_hex(std::string_view data);

}  // namespace specfsm::text
