#pragma once

#include <stdexcept>
#include <string>

namespace gart {

// Violated precondition or API contract (bad shapes, invalid arguments,
// degenerate inputs the caller promised not to pass).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or incompatible on-disk data (bad magic, version, digest, layout).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void contract_fail(const std::string& what) {
  throw ContractError(what);
}

inline void contract_check(bool ok, const std::string& what) {
  if (!ok) contract_fail(what);
}

}  // namespace gart
