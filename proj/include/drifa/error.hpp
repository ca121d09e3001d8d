#pragma once

#include <stdexcept>
#include <string>

namespace drifa {

// Error taxonomy shared by the tensor engine, model code and the CLI.
// The CLI maps kinds onto process exit codes (see cli.cpp).
enum class ErrorKind {
  ShapeMismatch,
  InvalidRate,
  LabelOutOfRange,
  GraphConsumed,
  MissingGrad,
  ConfigMismatch,
  WeightCountMismatch,
  InvalidTaskOrClass,
  InvalidSpec,
  NonSquareRotation,
  BadFractions,
  ConfigParse,
  DataNotFound,
  CheckpointCorrupt,
  InvalidFlag,
  LengthMismatch,
  NonFinite,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace drifa
