#pragma once

#include <stdexcept>
#include <string>

namespace neurocal {

// Runtime failure with a stable machine-readable code, e.g.
// "degenerate-filter", "unreachable-probability", "unidentifiable-scale".
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace neurocal
