#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nwadapt {

// Every failure the library reports carries one of these kinds. The CLI maps
// them onto exit codes (see exit_code_for).
enum class ErrorKind {
  invalid_shape,
  invalid_argument,
  shape_mismatch,
  tape_mismatch,
  invalid_label,
  data,
  format,
  io,
  divergence,
  profile_mismatch,
  floor_violation,
  usage,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Non-finite loss during training. `epoch` is the zero-based epoch in which
// the loss blew up; `iteration` is filled in by the adaptation loop (-1 when
// the failure happened outside of it).
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, int iteration, const std::string& message)
      : Error(ErrorKind::divergence, message), epoch_(epoch), iteration_(iteration) {}

  int epoch() const noexcept { return epoch_; }
  int iteration() const noexcept { return iteration_; }

 private:
  int epoch_;
  int iteration_;
};

// 0 success, 2 usage, 3 data/model, 4 numerical divergence.
int exit_code_for(ErrorKind kind);

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace nwadapt
