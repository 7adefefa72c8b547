#include "crossgrasp/errors.hpp"

namespace crossgrasp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedDocument: return "MalformedDocument";
    case ErrorKind::CyclicKinematics: return "CyclicKinematics";
    case ErrorKind::UnknownLinkRef: return "UnknownLinkRef";
    case ErrorKind::UnsupportedJoint: return "UnsupportedJoint";
    case ErrorKind::CapacityExceeded: return "CapacityExceeded";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotAFingertip: return "NotAFingertip";
    case ErrorKind::NoFingertips: return "NoFingertips";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NotAScalarLoss: return "NotAScalarLoss";
    case ErrorKind::AllMasked: return "AllMasked";
    case ErrorKind::EmptyCloud: return "EmptyCloud";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::MissingCloud: return "MissingCloud";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::NoContacts: return "NoContacts";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateInput:
    case ErrorKind::NotAScalarLoss:
    case ErrorKind::NoContacts:
    case ErrorKind::AllMasked:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)), kind_(kind) {}

void fail(ErrorKind kind, const std::string& detail) { throw Error(kind, detail); }

}  // namespace crossgrasp
