#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace evsc {

/// Line-based key=value text: '#' lines and blank lines are comments,
/// whitespace around keys and values is trimmed, later keys win.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values_file(const std::string& path);

/// Typed getters; each throws Error("config", ...) naming the key when the
/// value does not parse. The *_or forms return the fallback for missing keys.
bool kv_has(const KeyValues& kv, const std::string& key);
std::string kv_string(const KeyValues& kv, const std::string& key);
std::string kv_string_or(const KeyValues& kv, const std::string& key, std::string fallback);
std::int64_t kv_int(const KeyValues& kv, const std::string& key);
std::int64_t kv_int_or(const KeyValues& kv, const std::string& key, std::int64_t fallback);
std::uint64_t kv_u64(const KeyValues& kv, const std::string& key);
std::uint64_t kv_u64_or(const KeyValues& kv, const std::string& key, std::uint64_t fallback);
double kv_double(const KeyValues& kv, const std::string& key);
double kv_double_or(const KeyValues& kv, const std::string& key, double fallback);
std::vector<std::int64_t> kv_int_list(const KeyValues& kv, const std::string& key);
std::vector<double> kv_double_list(const KeyValues& kv, const std::string& key);

std::string format_double(double v);  // %.17g, round-trip safe

}  // namespace evsc
