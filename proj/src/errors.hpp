#pragma once

#include <stdexcept>
#include <string>

namespace hepato {

// Malformed file content (bad magic, inconsistent header, short payload).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / transport failures, always carrying path or URL context.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Batch study source unreachable (listing failed, not a per-study fetch).
struct SourceError : std::runtime_error {
  explicit SourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hepato
