// SPDX-License-Identifier: Apache-2.0
//
// wbhb - wideband mm-Wave hybrid beamforming toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WBHB_ERRORS_HPP
#define WBHB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wbhb {

// Invalid arguments use std::invalid_argument; everything below is a
// numerical or configuration condition a caller may want to catch by kind.

/// Linear inverse problem without a unique solution (rank-deficient Gram).
class IllPosedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that makes a metric or decomposition undefined (zero norm, rank < N_S).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values produced during an iterative solve or training run.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int iteration = -1)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt or incompatible binary file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wbhb

#endif  // WBHB_ERRORS_HPP
