#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "microdyn/source.hpp"

namespace microdyn {

enum class ErrorCode {
  // frontend
  TabSpaceMix,
  UnterminatedString,
  InvalidCharacter,
  Syntax,
  UnsupportedFeature,
  // semant
  UnboundName,
  NonlocalWithoutBinding,
  RedeclarationKind,
  KindConflict,
  AmbiguousKind,
  NestedDynamic,
  NonTopLevelDynamic,
  DeleteNonProc,
  ArityMismatch,
  LexLevelsInsufficient,
  // plumbing
  Io,
};

std::string_view errorName(ErrorCode code);

/// Error raised by the compiler pipeline. Carries a source position when one
/// is meaningful (line 0 means "no position").
class CompileError : public std::runtime_error {
 public:
  CompileError(ErrorCode code, SourcePos pos, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  SourcePos pos() const noexcept { return pos_; }

 private:
  ErrorCode code_;
  SourcePos pos_;
};

[[noreturn]] void fail(ErrorCode code, SourcePos pos, const std::string& message);

}  // namespace microdyn
