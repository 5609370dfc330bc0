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

#ifndef WBHB_CONFIG_HPP
#define WBHB_CONFIG_HPP

#include "wbhb/channel.hpp"
#include "wbhb/hybrid.hpp"
#include "wbhb/neural.hpp"
#include "wbhb/pilot.hpp"
#include "wbhb/types.hpp"

#include "json.hpp"

#include <string>

namespace wbhb {

using json = nlohmann::json;

// Conversions used by configuration files, dataset sidecars and run logs.
// Reading starts from the defaults, so any key may be omitted; unknown keys
// and wrongly typed values raise ConfigError. Infinite SNRs are written as
// the string "inf".

void to_json(json& j, const SystemConfig& c);
void from_json(const json& j, SystemConfig& c);
void to_json(json& j, const PilotConfig& c);
void from_json(const json& j, PilotConfig& c);
void to_json(json& j, const ScenarioOptions& c);
void from_json(const json& j, ScenarioOptions& c);
void to_json(json& j, const AltMinOptions& c);
void from_json(const json& j, AltMinOptions& c);
void to_json(json& j, const HybridOptions& c);
void from_json(const json& j, HybridOptions& c);
void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);

/// Rejects keys outside `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where);

json snr_to_json(double db);
double snr_from_json(const json& j);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_hash(const json& j);

}  // namespace wbhb

#endif  // WBHB_CONFIG_HPP
