// Copyright 2026 The mmforecast Authors. All Rights Reserved.
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

#ifndef MMF_ERRORS_H_
#define MMF_ERRORS_H_

#include <stdexcept>
#include <string>

namespace mmf {

// Base of every error raised by the library. The CLI maps subclasses onto
// distinct process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or grid sizes that do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated files. The message names the offending field.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required input (checkpoint, cache, dataset) is missing or stale.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or cache written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmf

#endif  // MMF_ERRORS_H_
