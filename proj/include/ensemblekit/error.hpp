#pragma once

#include <stdexcept>
#include <string>

namespace ensemblekit {

/// Input violates a domain invariant (bad values, mismatched sets, bad flags).
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

} // namespace ensemblekit
