#include "stwind/error.hpp"

namespace stwind {

ErrorClass class_of(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::config:
  case ErrorKind::parameter:
    return ErrorClass::config;
  case ErrorKind::io:
  case ErrorKind::schema:
  case ErrorKind::duplicate:
  case ErrorKind::dimension:
  case ErrorKind::imputation:
  case ErrorKind::extent:
  case ErrorKind::completeness:
  case ErrorKind::evaluation:
  case ErrorKind::geometry:
  case ErrorKind::range:
    return ErrorClass::data;
  case ErrorKind::singular:
  case ErrorKind::selection:
  case ErrorKind::dof:
  case ErrorKind::ensemble:
  case ErrorKind::fit:
  case ErrorKind::numeric:
    return ErrorClass::numeric;
  }
  return ErrorClass::data;
}

std::string_view kind_name(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::config: return "E_CONFIG";
  case ErrorKind::parameter: return "E_PARAMETER";
  case ErrorKind::io: return "E_IO";
  case ErrorKind::schema: return "E_SCHEMA";
  case ErrorKind::duplicate: return "E_DUPLICATE";
  case ErrorKind::dimension: return "E_DIMENSION";
  case ErrorKind::imputation: return "E_IMPUTATION";
  case ErrorKind::extent: return "E_EXTENT";
  case ErrorKind::completeness: return "E_COMPLETENESS";
  case ErrorKind::evaluation: return "E_EVALUATION";
  case ErrorKind::geometry: return "E_GEOMETRY";
  case ErrorKind::singular: return "E_SINGULAR";
  case ErrorKind::selection: return "E_SELECTION";
  case ErrorKind::dof: return "E_DOF";
  case ErrorKind::ensemble: return "E_ENSEMBLE";
  case ErrorKind::fit: return "E_FIT";
  case ErrorKind::numeric: return "E_NUMERIC";
  case ErrorKind::range: return "E_RANGE";
  }
  return "E_UNKNOWN";
}

void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

} // namespace stwind
