#include "evsc/kv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "evsc/error.hpp"

namespace evsc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const KeyValues& kv, const std::string& key, const char* kind) {
  std::string value = kv_string(kv, key);
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw config_error("key '" + key + "': expected " + kind + ", got '" + value + "'");
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const KeyValues& kv, const std::string& key, Parse parse_one) {
  std::string value = kv_string(kv, key);
  std::vector<T> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    std::size_t comma = value.find(',', pos);
    std::string tok = value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(parse_one(std::string(trim(tok)), key));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    bool last = eol == std::string_view::npos;
    pos = last ? text.size() + 1 : eol + 1;
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw config_error("line " + std::to_string(line_no) + ": expected key=value, got '" +
                         std::string(line) + "'");
    }
    std::string key{trim(line.substr(0, eq))};
    std::string value{trim(line.substr(eq + 1))};
    if (key.empty()) throw config_error("line " + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_key_values(text);
}

bool kv_has(const KeyValues& kv, const std::string& key) { return kv.count(key) != 0; }

std::string kv_string(const KeyValues& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw config_error("missing key '" + key + "'");
  return it->second;
}

std::string kv_string_or(const KeyValues& kv, const std::string& key, std::string fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

std::int64_t kv_int(const KeyValues& kv, const std::string& key) {
  return parse_number<std::int64_t>(kv, key, "integer");
}

std::int64_t kv_int_or(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
  return kv_has(kv, key) ? kv_int(kv, key) : fallback;
}

std::uint64_t kv_u64(const KeyValues& kv, const std::string& key) {
  return parse_number<std::uint64_t>(kv, key, "non-negative integer");
}

std::uint64_t kv_u64_or(const KeyValues& kv, const std::string& key, std::uint64_t fallback) {
  return kv_has(kv, key) ? kv_u64(kv, key) : fallback;
}

double kv_double(const KeyValues& kv, const std::string& key) {
  return parse_number<double>(kv, key, "number");
}

double kv_double_or(const KeyValues& kv, const std::string& key, double fallback) {
  return kv_has(kv, key) ? kv_double(kv, key) : fallback;
}

std::vector<std::int64_t> kv_int_list(const KeyValues& kv, const std::string& key) {
  return parse_list<std::int64_t>(kv, key, [](const std::string& tok, const std::string& k) {
    std::int64_t v{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw config_error("key '" + k + "': bad integer '" + tok + "'");
    }
    return v;
  });
}

std::vector<double> kv_double_list(const KeyValues& kv, const std::string& key) {
  return parse_list<double>(kv, key, [](const std::string& tok, const std::string& k) {
    double v{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw config_error("key '" + k + "': bad number '" + tok + "'");
    }
    return v;
  });
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace evsc
