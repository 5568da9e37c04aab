#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epsmax {

enum class ErrorKind {
  kInvalidInput,
  kDimension,
  kDomain,
  kIndex,
  kRange,
  kConfig,
  kPrecondition,
  kContract,
  kParse,
  kData,
  kFormat,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace epsmax
