#include "epsmax/error.hpp"

namespace epsmax {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kPrecondition: return "precondition error";
    case ErrorKind::kContract: return "contract violation";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace epsmax
