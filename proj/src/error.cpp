#include "microdyn/error.hpp"

#include <fstream>
#include <sstream>

namespace microdyn {

std::string_view errorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::TabSpaceMix: return "TabSpaceMixError";
    case ErrorCode::UnterminatedString: return "UnterminatedStringError";
    case ErrorCode::InvalidCharacter: return "InvalidCharacterError";
    case ErrorCode::Syntax: return "SyntaxError";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeatureError";
    case ErrorCode::UnboundName: return "UnboundNameError";
    case ErrorCode::NonlocalWithoutBinding: return "NonlocalWithoutBindingError";
    case ErrorCode::RedeclarationKind: return "RedeclarationKindError";
    case ErrorCode::KindConflict: return "KindConflictError";
    case ErrorCode::AmbiguousKind: return "AmbiguousKindError";
    case ErrorCode::NestedDynamic: return "NestedDynamicError";
    case ErrorCode::NonTopLevelDynamic: return "NonTopLevelDynamicError";
    case ErrorCode::DeleteNonProc: return "DeleteNonProcError";
    case ErrorCode::ArityMismatch: return "ArityMismatchError";
    case ErrorCode::LexLevelsInsufficient: return "LexLevelsInsufficientError";
    case ErrorCode::Io: return "IoError";
  }
  return "Error";
}

namespace {

std::string formatMessage(ErrorCode code, SourcePos pos, const std::string& message) {
  std::ostringstream out;
  out << errorName(code);
  if (pos.line > 0) out << " at " << pos.line << ':' << pos.col;
  out << ": " << message;
  return out.str();
}

}  // namespace

CompileError::CompileError(ErrorCode code, SourcePos pos, const std::string& message)
    : std::runtime_error(formatMessage(code, pos, message)), code_(code), pos_(pos) {}

void fail(ErrorCode code, SourcePos pos, const std::string& message) {
  throw CompileError(code, pos, message);
}

SourceProgram::SourceProgram(std::string path, std::string body)
    : path_(std::move(path)), body_(std::move(body)) {
  lineStarts_.push_back(0);
  for (std::size_t i = 0; i < body_.size(); ++i)
    if (body_[i] == '\n' && i + 1 < body_.size()) lineStarts_.push_back(i + 1);
}

SourceProgram SourceProgram::fromFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, {}, "no such file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return SourceProgram(path.string(), buf.str());
}

}  // namespace microdyn
