#pragma once

#include <stdexcept>
#include <string>

namespace psd {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShape = 2,
  kIo = 3,
  kCorruptFile = 4,
  kConfigMismatch = 5,
  kConfig = 6,
  kRuntime = 7,
};

// Base of every exception thrown by the library. The code survives the
// trip through the C API unchanged.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCode::kShape, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

class CorruptFile : public Error {
 public:
  explicit CorruptFile(const std::string& what) : Error(ErrorCode::kCorruptFile, what) {}
};

class ConfigMismatch : public Error {
 public:
  explicit ConfigMismatch(const std::string& what) : Error(ErrorCode::kConfigMismatch, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

}  // namespace psd
