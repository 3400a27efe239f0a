// Copyright 2026 The Deconfound Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DECONFOUND_ERROR_HPP_
#define DECONFOUND_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace deconfound {

// Error classes map one-to-one onto the process exit codes of the CLI and the
// status codes of the C API: usage/config = 2, I/O = 3, numerical = 4.
enum class ErrorKind {
  kConfig = 2,
  kIo = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Bad configuration, bad flags, or malformed input data.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

// Rank deficiency, divergence, degenerate instruments, undefined statistics.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

}  // namespace deconfound

#endif  // DECONFOUND_ERROR_HPP_
