#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualsp {

enum class Errc {
  UnbalancedParens,
  TrailingTokens,
  EmptyInput,
  EmptyNode,
  SyntaxError,
  DuplicateDecl,
  UnknownType,
  InsufficientVariety,
  IndexOutOfRange,
  UnknownEntity,
  NonFiniteLoss,
  MissingLM,
  EmptyBeam,
  EmptyLabeledSet,
  IoError,
  MalformedLine,
  UnparseableLF,
  LengthMismatch,
  BadCheckpoint,
  ConfigError,
};

constexpr std::string_view errc_name(Errc e) noexcept {
  switch (e) {
    case Errc::UnbalancedParens: return "UnbalancedParens";
    case Errc::TrailingTokens: return "TrailingTokens";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyNode: return "EmptyNode";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::DuplicateDecl: return "DuplicateDecl";
    case Errc::UnknownType: return "UnknownType";
    case Errc::InsufficientVariety: return "InsufficientVariety";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::MissingLM: return "MissingLM";
    case Errc::EmptyBeam: return "EmptyBeam";
    case Errc::EmptyLabeledSet: return "EmptyLabeledSet";
    case Errc::IoError: return "IoError";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::UnparseableLF: return "UnparseableLF";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the named kinds above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace dualsp
