#pragma once

#include <stdexcept>
#include <string>

namespace fscil {

enum class ErrorCode {
  invalid_argument,
  insufficient_classes,
  insufficient_shots,
  out_of_range,
  empty_input,
  dimension_mismatch,
  dimension_too_small,
  too_many_classes,
  missing_assignment,
  invalid_pairing,
  invalid_label,
  duplicate_class,
  unknown_layer,
  shape_mismatch,
  undefined_separation,
  uncovered_label,
  label_overlap,
  config,
  data,
  divergence,
  io,
  version_mismatch,
  corrupt_checkpoint,
  schema_mismatch,
  usage,
};

const char* to_string(ErrorCode code) noexcept;

// Process exit codes grouped by failure category.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int usage = 64;
inline constexpr int config = 65;
inline constexpr int data = 66;
inline constexpr int divergence = 70;
inline constexpr int checkpoint = 74;
}  // namespace exit_code

int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace fscil
