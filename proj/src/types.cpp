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

#include "wbhb/types.hpp"

#include <stdexcept>
#include <string>

namespace wbhb {

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemConfig: " + msg); };
  if (n_tx < 1 || n_rx < 1) fail("antenna counts must be >= 1");
  if (n_streams < 1) fail("n_streams must be >= 1");
  if (n_streams > n_rf) fail("n_streams must not exceed n_rf");
  if (n_rf > n_tx) fail("n_rf must not exceed n_tx");
  if (n_rf > n_rx) fail("n_rf must not exceed n_rx");
  if (n_subcarriers < 1) fail("n_subcarriers must be >= 1");
  if (cp_len < 1) fail("cp_len must be >= 1");
  if (!(symbol_period_s > 0.0)) fail("symbol_period_s must be positive");
  if (!(carrier_hz > 0.0)) fail("carrier_hz must be positive");
  if (!(spacing_wavelengths > 0.0)) fail("spacing_wavelengths must be positive");
}

double ChannelTensor::mean_entry_power() const {
  double total = 0.0;
  double count = 0.0;
  for (const auto& h : subcarriers) {
    total += h.squaredNorm();
    count += static_cast<double>(h.size());
  }
  return count > 0 ? total / count : 0.0;
}

double ChannelTensor::energy() const {
  double total = 0.0;
  for (const auto& h : subcarriers) total += h.squaredNorm();
  return total;
}

bool ChannelTensor::all_finite() const {
  for (const auto& h : subcarriers)
    if (!h.allFinite()) return false;
  return true;
}

ChannelTensor operator*(double s, const ChannelTensor& h) {
  ChannelTensor out = h;
  for (auto& m : out.subcarriers) m *= s;
  return out;
}

static void check_same_shape(const ChannelTensor& a, const ChannelTensor& b) {
  if (a.size() != b.size() || a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("ChannelTensor: dimension mismatch");
}

ChannelTensor operator+(const ChannelTensor& a, const ChannelTensor& b) {
  check_same_shape(a, b);
  ChannelTensor out = a;
  for (std::size_t m = 0; m < a.size(); ++m) out[m] += b[m];
  return out;
}

ChannelTensor operator-(const ChannelTensor& a, const ChannelTensor& b) {
  check_same_shape(a, b);
  ChannelTensor out = a;
  for (std::size_t m = 0; m < a.size(); ++m) out[m] -= b[m];
  return out;
}

}  // namespace wbhb
