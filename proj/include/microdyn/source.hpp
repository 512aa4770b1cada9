#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace microdyn {

/// 1-based line and column.
struct SourcePos {
  int line = 0;
  int col = 0;
  auto operator<=>(const SourcePos&) const = default;
};

struct SourceSpan {
  SourcePos begin;
  SourcePos end;
  bool contains(const SourceSpan& inner) const {
    return begin <= inner.begin && inner.end <= end;
  }
};

class SourceProgram {
 public:
  SourceProgram(std::string path, std::string body);

  static SourceProgram fromFile(const std::filesystem::path& path);

  const std::string& path() const { return path_; }
  const std::string& body() const { return body_; }
  /// Byte offset of the first character of every line.
  const std::vector<std::size_t>& lineStarts() const { return lineStarts_; }

 private:
  std::string path_;
  std::string body_;
  std::vector<std::size_t> lineStarts_;
};

}  // namespace microdyn
