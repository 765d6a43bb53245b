#include "expband/error.hpp"

namespace expband {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::domain: return "domain";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::calibration: return "calibration";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return 2;
    case ErrorKind::domain: return 3;
    case ErrorKind::numeric: return 4;
    case ErrorKind::calibration: return 5;
  }
  return 1;
}

}  // namespace expband
