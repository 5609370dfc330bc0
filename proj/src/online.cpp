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

#include "wbhb/online.hpp"

#include "wbhb/channel.hpp"
#include "wbhb/errors.hpp"
#include "wbhb/frameworks.hpp"
#include "wbhb/random.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>
#include <string>

namespace wbhb {

double eta_metric(const ChannelTensor& h_dl, const ChannelTensor& h_temp) {
  if (h_dl.size() != h_temp.size() || h_dl.rows() != h_temp.rows() || h_dl.cols() != h_temp.cols() ||
      h_dl.empty())
    throw std::invalid_argument("eta_metric: channel tensors differ in shape");
  double s = 0.0;
  for (std::size_t m = 0; m < h_dl.size(); ++m) s += (h_dl[m] - h_temp[m]).norm();
  return s / (static_cast<double>(h_dl.size()) * h_dl.rows() * h_dl.cols());
}

TrainConfig OnlineConfig::online_train_defaults() {
  TrainConfig t;
  t.max_epochs = 10;
  t.early_stop_patience_epochs = t.max_epochs + 1;
  return t;
}

void OnlineConfig::validate() const {
  sys.validate();
  pilot.validate(sys);
  train.validate();
  if (!(zeta > 0.0)) throw ConfigError("online: zeta must be positive");
  if (g_online < 2) throw ConfigError("online: the online dataset needs at least 2 samples");
  if (grid.empty()) throw ConfigError("online: empty augmentation grid");
  if (adce_grid.grid_tx < 1 || adce_grid.grid_rx < 1 || adce_grid.sparsity < 1)
    throw ConfigError("online: ADCE grid is not set");
  if (!(noise_var > 0.0)) throw ConfigError("online: noise_var must be positive");
}

OnlineState::OnlineState(NeuralNet mc_cenet, NeuralNet hbnet, OnlineConfig cfg)
    : mc_cenet_(std::move(mc_cenet)), hbnet_(std::move(hbnet)), cfg_(std::move(cfg)) {
  cfg_.validate();
  const SystemConfig& s = cfg_.sys;
  if (mc_cenet_.spec().input != Shape3{s.n_subcarriers * cfg_.pilot.m_rx, cfg_.pilot.m_tx, 3} ||
      mc_cenet_.spec().output_dim() != channel_label_length(s))
    throw ConfigError("online: MC-CENet does not match the system and pilot configuration");
  if (hbnet_.spec().input != Shape3{s.n_subcarriers * s.n_rx, s.n_tx, 3} ||
      hbnet_.spec().output_dim() != beamformer_label_length(s))
    throw ConfigError("online: HBNet does not match the system configuration");
  beams_ = training_beamformers(s, cfg_.pilot);
}

ChannelTensor OnlineState::predict_channel(const ReceivedPilot& y) const {
  return decode_channel(mc_cenet_.predict(featurize_pilot(y).data).col(0), cfg_.sys);
}

HybridBeamformer OnlineState::predict_beams(const ChannelTensor& h) const {
  return decode_beamformer(hbnet_.predict(featurize_channel(h).data).col(0), cfg_.sys);
}

ChannelTensor OnlineState::run_adce(const ReceivedPilot& y) {
  ChannelTensor h;
  try {
    h = adce_estimate(y, beams_, cfg_.adce_grid, cfg_.pilot.tx_power, cfg_.sys.spacing_wavelengths);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("online: ADCE failed: ") + e.what());
  }
  if (!h.all_finite()) throw NumericalError("online: ADCE returned non-finite entries");
  ++adce_calls_;
  return h;
}

void OnlineState::check_pilot(const ReceivedPilot& y) const {
  if (static_cast<int>(y.size()) != cfg_.sys.n_subcarriers)
    throw std::invalid_argument("online: pilot subcarrier count does not match");
  for (const auto& m : y.subcarriers)
    if (m.rows() != cfg_.pilot.m_rx || m.cols() != cfg_.pilot.m_tx)
      throw std::invalid_argument("online: pilot block is not M_R x M_T");
}

void OnlineState::initialize(const ReceivedPilot& y0) {
  check_pilot(y0);
  h_temp_ = run_adce(y0);
}

void OnlineState::refresh(const ReceivedPilot& y, const ChannelTensor& h_ad, int t) {
  const SystemConfig& s = cfg_.sys;
  const int g = cfg_.g_online;
  const auto step = static_cast<std::uint64_t>(t);
  const std::size_t n_grid = cfg_.grid.size();

  // MC-CENet: the observation with fresh pilot noise, labeled by ADCE.
  const RVector z_ad = encode_channel(h_ad);
  const Eigen::Index d_in = featurize_pilot(y).data.size();
  RMatrix x(d_in, g);
  RMatrix z(z_ad.size(), g);
  for (int i = 0; i < g; ++i) {
    const GridPoint& p = cfg_.grid[i % n_grid];
    const ReceivedPilot yi =
        add_pilot_noise(y, beams_, p.snr_pilot_db, derive_seed(cfg_.seed, {step, 1, static_cast<std::uint64_t>(i)}));
    x.col(i) = featurize_pilot(yi).data;
    z.col(i) = z_ad;
  }
  TrainConfig tc = cfg_.train;
  tc.rng_seed = derive_seed(cfg_.seed, {step, 2});
  NeuralNet ce = mc_cenet_;
  ce.freeze_convolutions();
  train(ce, ce.normalization.normalize_input(x), ce.normalization.normalize_output(z), tc);

  // HBNet: corrupted copies of the refined estimate, labeled by phase extraction.
  const ChannelTensor h_dl = decode_channel(ce.predict(featurize_pilot(y).data).col(0), s);
  HybridOptions pe;
  pe.method = HybridMethod::phase_extraction;
  const Eigen::Index h_in = featurize_channel(h_dl).data.size();
  RMatrix xh(h_in, g);
  RMatrix zb(beamformer_label_length(s), g);
  Eigen::Index kept = 0;
  for (int i = 0; i < g; ++i) {
    const GridPoint& p = cfg_.grid[i % n_grid];
    const ChannelTensor hc =
        corrupt_channel(h_dl, p.snr_h_db, derive_seed(cfg_.seed, {step, 3, static_cast<std::uint64_t>(i)}));
    try {
      HybridDesign d = design_hybrid(hc, s, std::pow(10.0, p.snr_db / 10.0), cfg_.noise_var, pe);
      align_analog_phases(d.beams);
      xh.col(kept) = featurize_channel(hc).data;
      zb.col(kept) = encode_beamformer(d.beams);
      ++kept;
    } catch (const DegenerateError&) {
    }
  }
  NeuralNet hb = hbnet_;
  hb.freeze_convolutions();
  if (kept >= 2) {
    tc.rng_seed = derive_seed(cfg_.seed, {step, 4});
    train(hb, hb.normalization.normalize_input(xh.leftCols(kept)),
          hb.normalization.normalize_output(zb.leftCols(kept)), tc);
  }
  // Commit only after both refreshes succeeded.
  mc_cenet_ = std::move(ce);
  hbnet_ = std::move(hb);
}

OnlineStepResult OnlineState::step(const ReceivedPilot& y, const ChannelTensor* truth) {
  if (!initialized()) throw std::logic_error("online: step before initialize");
  check_pilot(y);
  const int t = static_cast<int>(history_.size());
  OnlineStepResult r;
  r.log.step = t;
  r.h_dl = predict_channel(y);
  r.log.eta = eta_metric(r.h_dl, h_temp_);
  if (!std::isfinite(r.log.eta)) throw NumericalError("online: non-finite channel prediction", t);
  if (r.log.eta >= cfg_.zeta) {
    const ChannelTensor h_ad = run_adce(y);
    r.log.eta_refreshed = eta_metric(r.h_dl, h_ad);
    refresh(y, h_ad, t);
    h_temp_ = h_ad;
    ++updates_;
    r.log.updated = true;
    r.h_dl = predict_channel(y);
    r.log.eta_after = eta_metric(r.h_dl, h_temp_);
  }
  r.beams = predict_beams(r.h_dl);
  if (truth) {
    r.log.nmse = nmse(*truth, r.h_dl);
    try {
      r.log.rate = spectral_efficiency(*truth, r.beams, std::pow(10.0, cfg_.snr_db / 10.0), cfg_.noise_var);
    } catch (const DegenerateError&) {
    }
  }
  history_.push_back(r.log);
  return r;
}

void write_online_csv(std::ostream& os, const std::vector<OnlineStepLog>& log, double zeta,
                      const std::string& config_hash) {
  os << "# config_hash " << config_hash << '\n';
  os << "step,eta,zeta,updated,eta_refreshed,eta_after,nmse,rate\n";
  os << std::setprecision(10);
  for (const auto& l : log)
    os << l.step << ',' << l.eta << ',' << zeta << ',' << (l.updated ? 1 : 0) << ',' << l.eta_refreshed << ','
       << l.eta_after
       << ',' << l.nmse << ',' << l.rate << '\n';
}

}  // namespace wbhb
