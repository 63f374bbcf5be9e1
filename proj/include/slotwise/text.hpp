#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace slotwise {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// ASCII whitespace trim.
std::string trim(std::string_view s);

std::string to_lower_ascii(std::string_view s);

// Canonical tokenizer shared by retrieval and the reference metrics:
// ASCII letters are lowercased, every byte outside [A-Za-z0-9] and below 0x80
// separates tokens, bytes >= 0x80 are kept so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

std::vector<std::string> split_lines(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Prefix of at most max_chars UTF-8 code points.
std::string utf8_prefix(std::string_view s, std::size_t max_chars);

bool is_valid_utf8(std::string_view s);

// "2026-10-18T20:08:12.345Z"
std::string format_iso8601(Timestamp t);
Timestamp parse_iso8601(std::string_view s);

// "20261018T200812345Z", safe for filenames.
std::string format_compact_utc(Timestamp t);

Timestamp now_utc();

}  // namespace slotwise

#include <functional>

namespace slotwise {

// Injected wherever wall-clock time would make output irreproducible.
using Clock = std::function<Timestamp()>;

}  // namespace slotwise

namespace slotwise {

std::string base64_encode(std::string_view bytes);
// Throws Error(InvalidArgument) for malformed input.
std::string base64_decode(std::string_view text);

}  // namespace slotwise
