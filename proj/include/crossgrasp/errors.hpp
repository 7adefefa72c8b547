#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crossgrasp {

enum class ErrorKind {
  MalformedDocument,
  CyclicKinematics,
  UnknownLinkRef,
  UnsupportedJoint,
  CapacityExceeded,
  DegenerateInput,
  DimensionMismatch,
  NotAFingertip,
  NoFingertips,
  EmptyData,
  ShapeMismatch,
  NotAScalarLoss,
  AllMasked,
  EmptyCloud,
  ConfigMismatch,
  EmptyDataset,
  SchemaError,
  MissingCloud,
  InvalidSpec,
  NoContacts,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Errors that are caused by bad user input rather than by numerics.
bool is_input_error(ErrorKind kind);

// Every library failure is reported through this type; what() starts with the
// kind name so command-line diagnostics stay grep-able.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& detail);

}  // namespace crossgrasp
