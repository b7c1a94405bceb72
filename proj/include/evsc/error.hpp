#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evsc {

/// Library-wide exception. `code` is a stable machine-readable category
/// ("parse", "validate", "io", "dimension", "order", "empty-branch",
/// "config"); what() is "<code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(std::string_view code, std::string_view detail)
      : std::runtime_error(std::string(code) + ": " + std::string(detail)),
        code_(code) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

inline Error parse_error(std::string_view detail) { return Error("parse", detail); }
inline Error validate_error(std::string_view detail) { return Error("validate", detail); }
inline Error io_error(std::string_view detail) { return Error("io", detail); }
inline Error dimension_error(std::string_view detail) { return Error("dimension", detail); }
inline Error order_error(std::string_view detail) { return Error("order", detail); }
inline Error config_error(std::string_view detail) { return Error("config", detail); }

}  // namespace evsc
