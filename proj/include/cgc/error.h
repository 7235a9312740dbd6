// Copyright 2026 The CGC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CGC_ERROR_H_
#define CGC_ERROR_H_

#include <stdexcept>
#include <string>

namespace cgc {

enum class ErrorKind {
  kConfig,       // invalid configuration value or file
  kStructural,   // shape / architecture / tape mismatch
  kUsage,        // argument outside an operation's domain
  kUnsupported,  // valid request the selected configuration cannot serve
  kNumeric,      // non-finite or divergent values
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes: 0 success, 2 configuration, 3 numeric, 4 I/O.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumeric:
      return 3;
    case ErrorKind::kIo:
      return 4;
    default:
      return 2;
  }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace cgc

#endif  // CGC_ERROR_H_
