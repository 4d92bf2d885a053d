#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ladder {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition or type invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A file did not parse under its declared format. Carries the 1-based
/// offending line (0 when the problem is not tied to a line).
class FormatError : public Error {
 public:
  FormatError(std::string path, std::size_t line, const std::string& what)
      : Error(path + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

/// Raised when an operation fails for a known set of item ids.
class ItemsError : public Error {
 public:
  ItemsError(const std::string& what, std::vector<std::string> ids)
      : Error(what + ": " + join(ids)), ids_(std::move(ids)) {}

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  static std::string join(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
      if (!out.empty()) out += ", ";
      out += id;
    }
    return out;
  }
  std::vector<std::string> ids_;
};

}  // namespace ladder
