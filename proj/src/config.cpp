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

#include "wbhb/config.hpp"

#include "wbhb/errors.hpp"

#include <cmath>
#include <cstdio>

namespace wbhb {

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
  }
}

void read_snr(const json& j, const char* key, double& field) {
  auto it = j.find(key);
  if (it != j.end()) field = snr_from_json(*it);
}

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

}  // namespace

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  expect_object(j, where);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

json snr_to_json(double db) {
  if (std::isinf(db)) return db > 0 ? json("inf") : json("-inf");
  return db;
}

double snr_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kNoNoise;
    if (s == "-inf") return -kNoNoise;
  }
  throw ConfigError("SNR must be a number or \"inf\", got " + j.dump());
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void to_json(json& j, const SystemConfig& c) {
  j = json{{"n_tx", c.n_tx},
           {"n_rx", c.n_rx},
           {"n_rf", c.n_rf},
           {"n_streams", c.n_streams},
           {"n_subcarriers", c.n_subcarriers},
           {"carrier_hz", c.carrier_hz},
           {"bandwidth_hz", c.bandwidth_hz},
           {"spacing_wavelengths", c.spacing_wavelengths},
           {"cp_len", c.cp_len},
           {"symbol_period_s", c.symbol_period_s},
           {"unit_gain", c.unit_gain}};
}

void from_json(const json& j, SystemConfig& c) {
  check_keys(j,
             {"n_tx", "n_rx", "n_rf", "n_streams", "n_subcarriers", "carrier_hz", "bandwidth_hz",
              "spacing_wavelengths", "cp_len", "symbol_period_s", "unit_gain"},
             "system");
  read(j, "n_tx", c.n_tx);
  read(j, "n_rx", c.n_rx);
  read(j, "n_rf", c.n_rf);
  read(j, "n_streams", c.n_streams);
  read(j, "n_subcarriers", c.n_subcarriers);
  read(j, "carrier_hz", c.carrier_hz);
  read(j, "bandwidth_hz", c.bandwidth_hz);
  read(j, "spacing_wavelengths", c.spacing_wavelengths);
  read(j, "cp_len", c.cp_len);
  read(j, "symbol_period_s", c.symbol_period_s);
  read(j, "unit_gain", c.unit_gain);
}

void to_json(json& j, const PilotConfig& c) {
  j = json{{"m_tx", c.m_tx},
           {"m_rx", c.m_rx},
           {"tx_power", c.tx_power},
           {"snr_pilot_db", snr_to_json(c.snr_pilot_db)},
           {"pilot_snr_test_db", snr_to_json(c.pilot_snr_test_db)},
           {"pilot_symbol_snr_db", snr_to_json(c.pilot_symbol_snr_db)}};
  if (c.noise_var) j["noise_var"] = *c.noise_var;
}

void from_json(const json& j, PilotConfig& c) {
  check_keys(j,
             {"m_tx", "m_rx", "tx_power", "snr_pilot_db", "pilot_snr_test_db",
              "pilot_symbol_snr_db", "noise_var"},
             "pilot");
  read(j, "m_tx", c.m_tx);
  read(j, "m_rx", c.m_rx);
  read(j, "tx_power", c.tx_power);
  read_snr(j, "snr_pilot_db", c.snr_pilot_db);
  read_snr(j, "pilot_snr_test_db", c.pilot_snr_test_db);
  read_snr(j, "pilot_symbol_snr_db", c.pilot_symbol_snr_db);
  if (j.contains("noise_var")) {
    double v = 0;
    read(j, "noise_var", v);
    c.noise_var = v;
  }
}

void to_json(json& j, const ScenarioOptions& c) {
  j = json{{"ray_angle_spread_deg", c.ray_angle_spread_deg},
           {"ray_delay_max_symbols", c.ray_delay_max_symbols}};
}

void from_json(const json& j, ScenarioOptions& c) {
  check_keys(j, {"ray_angle_spread_deg", "ray_delay_max_symbols"}, "scenario");
  read(j, "ray_angle_spread_deg", c.ray_angle_spread_deg);
  read(j, "ray_delay_max_symbols", c.ray_delay_max_symbols);
}

void to_json(json& j, const AltMinOptions& c) {
  j = json{{"outer_iters", c.outer_iters}, {"inner_iters", c.inner_iters}, {"tol", c.tol},
           {"seed", c.seed},               {"reduced", c.reduced},         {"restarts", c.restarts}};
}

void from_json(const json& j, AltMinOptions& c) {
  check_keys(j, {"outer_iters", "inner_iters", "tol", "seed", "reduced", "restarts"}, "altmin");
  read(j, "outer_iters", c.outer_iters);
  read(j, "inner_iters", c.inner_iters);
  read(j, "tol", c.tol);
  read(j, "seed", c.seed);
  read(j, "reduced", c.reduced);
  read(j, "restarts", c.restarts);
}

void to_json(json& j, const HybridOptions& c) {
  j = json{{"method", c.method == HybridMethod::manifold ? "mo" : "pe"},
           {"altmin", c.altmin},
           {"weighted_combiner", c.weighted_combiner}};
}

void from_json(const json& j, HybridOptions& c) {
  check_keys(j, {"method", "altmin", "weighted_combiner"}, "hybrid");
  if (j.contains("method")) {
    std::string m;
    read(j, "method", m);
    if (m == "mo") c.method = HybridMethod::manifold;
    else if (m == "pe") c.method = HybridMethod::phase_extraction;
    else throw ConfigError("hybrid.method must be \"mo\" or \"pe\", got \"" + m + "\"");
  }
  read(j, "altmin", c.altmin);
  read(j, "weighted_combiner", c.weighted_combiner);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr", c.lr},
           {"momentum", c.momentum},
           {"batch_size", c.batch_size},
           {"lr_decay_factor", c.lr_decay_factor},
           {"lr_decay_every_epochs", c.lr_decay_every_epochs},
           {"early_stop_patience_epochs", c.early_stop_patience_epochs},
           {"max_epochs", c.max_epochs},
           {"validation_fraction", c.validation_fraction},
           {"rng_seed", c.rng_seed}};
}

void from_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"lr", "momentum", "batch_size", "lr_decay_factor", "lr_decay_every_epochs",
              "early_stop_patience_epochs", "max_epochs", "validation_fraction", "rng_seed"},
             "train");
  read(j, "lr", c.lr);
  read(j, "momentum", c.momentum);
  read(j, "batch_size", c.batch_size);
  read(j, "lr_decay_factor", c.lr_decay_factor);
  read(j, "lr_decay_every_epochs", c.lr_decay_every_epochs);
  read(j, "early_stop_patience_epochs", c.early_stop_patience_epochs);
  read(j, "max_epochs", c.max_epochs);
  read(j, "validation_fraction", c.validation_fraction);
  read(j, "rng_seed", c.rng_seed);
}

}  // namespace wbhb
