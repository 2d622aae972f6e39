#include "fscil/error.hpp"

namespace fscil {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::insufficient_classes: return "insufficient-classes";
    case ErrorCode::insufficient_shots: return "insufficient-shots";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::empty_input: return "empty-input";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::dimension_too_small: return "dimension-too-small";
    case ErrorCode::too_many_classes: return "too-many-classes";
    case ErrorCode::missing_assignment: return "missing-assignment";
    case ErrorCode::invalid_pairing: return "invalid-pairing";
    case ErrorCode::invalid_label: return "invalid-label";
    case ErrorCode::duplicate_class: return "duplicate-class";
    case ErrorCode::unknown_layer: return "unknown-layer";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::undefined_separation: return "undefined-separation";
    case ErrorCode::uncovered_label: return "uncovered-label";
    case ErrorCode::label_overlap: return "label-overlap";
    case ErrorCode::config: return "config";
    case ErrorCode::data: return "data";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::io: return "io";
    case ErrorCode::version_mismatch: return "version-mismatch";
    case ErrorCode::corrupt_checkpoint: return "corrupt-checkpoint";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::usage: return "usage";
  }
  return "unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::usage:
      return exit_code::usage;
    case ErrorCode::config:
    case ErrorCode::unknown_layer:
    case ErrorCode::schema_mismatch:
      return exit_code::config;
    case ErrorCode::data:
    case ErrorCode::insufficient_classes:
    case ErrorCode::insufficient_shots:
    case ErrorCode::label_overlap:
    case ErrorCode::uncovered_label:
    case ErrorCode::io:
      return exit_code::data;
    case ErrorCode::divergence:
      return exit_code::divergence;
    case ErrorCode::version_mismatch:
    case ErrorCode::corrupt_checkpoint:
      return exit_code::checkpoint;
    default:
      return exit_code::failure;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace fscil
