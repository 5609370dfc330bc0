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

#include "wbhb/frameworks.hpp"

#include "wbhb/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wbhb {

namespace {

double wrapped_phase(cplx v) {
  const double p = std::arg(v);
  return p <= -kPi ? p + 2.0 * kPi : p;
}

void check_length(const RVector& z, Eigen::Index expected, const char* what) {
  if (z.size() != expected)
    throw std::invalid_argument(std::string(what) + ": label length " + std::to_string(z.size()) +
                                ", expected " + std::to_string(expected));
}

// Appends Re vec(a) then Im vec(a) at `pos`.
void put_complex(RVector& z, Eigen::Index& pos, const CMatrix& a) {
  const Eigen::Index n = a.size();
  z.segment(pos, n) = a.reshaped().real();
  z.segment(pos + n, n) = a.reshaped().imag();
  pos += 2 * n;
}

CMatrix get_complex(const RVector& z, Eigen::Index& pos, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index n = rows * cols;
  CMatrix a(rows, cols);
  for (Eigen::Index k = 0; k < n; ++k) a.reshaped()(k) = cplx(z(pos + k), z(pos + n + k));
  pos += 2 * n;
  return a;
}

}  // namespace

FeatureTensor featurize(std::span<const CMatrix> blocks) {
  if (blocks.empty()) throw std::invalid_argument("featurize: no blocks");
  const Eigen::Index r = blocks.front().rows();
  const Eigen::Index c = blocks.front().cols();
  FeatureTensor x;
  x.shape = Shape3{static_cast<int>(r * blocks.size()), static_cast<int>(c), 3};
  x.data.resize(x.shape.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].rows() != r || blocks[b].cols() != c)
      throw std::invalid_argument("featurize: blocks differ in shape");
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) {
        const cplx v = blocks[b](i, j);
        const int row = static_cast<int>(b * r + i);
        x.at(row, j, 0) = std::abs(v);
        x.at(row, j, 1) = v.real();
        x.at(row, j, 2) = v.imag();
      }
  }
  return x;
}

std::vector<CMatrix> complex_blocks(const FeatureTensor& x, int n_blocks) {
  if (n_blocks <= 0 || x.shape.h % n_blocks != 0 || x.shape.c != 3)
    throw std::invalid_argument("complex_blocks: shape does not split into blocks");
  const int r = x.shape.h / n_blocks;
  std::vector<CMatrix> out(n_blocks, CMatrix(r, x.shape.w));
  for (int b = 0; b < n_blocks; ++b)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < x.shape.w; ++j)
        out[b](i, j) = cplx(x.at(b * r + i, j, 1), x.at(b * r + i, j, 2));
  return out;
}

FeatureTensor featurize_pilot(const ReceivedPilot& y) { return featurize(y.subcarriers); }

std::vector<FeatureTensor> featurize_pilot_per_subcarrier(const ReceivedPilot& y) {
  std::vector<FeatureTensor> out;
  out.reserve(y.size());
  for (const auto& m : y.subcarriers) out.push_back(featurize(std::span<const CMatrix>(&m, 1)));
  return out;
}

FeatureTensor featurize_channel(const ChannelTensor& h) { return featurize(h.subcarriers); }

int beamformer_label_length(const SystemConfig& cfg) {
  return cfg.n_rf * (cfg.n_tx + cfg.n_rx + 4 * cfg.n_subcarriers * cfg.n_streams);
}

int channel_label_length(const SystemConfig& cfg) {
  return 2 * cfg.n_subcarriers * cfg.n_rx * cfg.n_tx;
}

RVector encode_beamformer(const HybridBeamformer& b) {
  const Eigen::Index nf = b.f_rf.size();
  const Eigen::Index nw = b.w_rf.size();
  Eigen::Index total = nf + nw;
  for (std::size_t m = 0; m < b.size(); ++m) total += 2 * (b.f_bb[m].size() + b.w_bb[m].size());
  RVector z(total);
  for (Eigen::Index k = 0; k < nf; ++k) z(k) = wrapped_phase(b.f_rf.reshaped()(k));
  for (Eigen::Index k = 0; k < nw; ++k) z(nf + k) = wrapped_phase(b.w_rf.reshaped()(k));
  Eigen::Index pos = nf + nw;
  for (std::size_t m = 0; m < b.size(); ++m) {
    put_complex(z, pos, b.f_bb[m]);
    put_complex(z, pos, b.w_bb[m]);
  }
  return z;
}

HybridBeamformer decode_beamformer(const RVector& z, const SystemConfig& cfg) {
  check_length(z, beamformer_label_length(cfg), "decode_beamformer");
  HybridBeamformer b;
  b.f_rf.resize(cfg.n_tx, cfg.n_rf);
  b.w_rf.resize(cfg.n_rx, cfg.n_rf);
  const Eigen::Index nf = b.f_rf.size();
  for (Eigen::Index k = 0; k < nf; ++k) b.f_rf.reshaped()(k) = std::polar(1.0, z(k));
  for (Eigen::Index k = 0; k < b.w_rf.size(); ++k) b.w_rf.reshaped()(k) = std::polar(1.0, z(nf + k));
  Eigen::Index pos = nf + b.w_rf.size();
  for (int m = 0; m < cfg.n_subcarriers; ++m) {
    b.f_bb.push_back(get_complex(z, pos, cfg.n_rf, cfg.n_streams));
    b.w_bb.push_back(get_complex(z, pos, cfg.n_rf, cfg.n_streams));
  }
  normalize_power(b.f_rf, b.f_bb);
  return b;
}

RVector encode_channel(const ChannelTensor& h) {
  Eigen::Index total = 0;
  for (const auto& m : h.subcarriers) total += 2 * m.size();
  RVector z(total);
  Eigen::Index pos = 0;
  for (const auto& m : h.subcarriers) put_complex(z, pos, m);
  return z;
}

ChannelTensor decode_channel(const RVector& z, const SystemConfig& cfg) {
  check_length(z, channel_label_length(cfg), "decode_channel");
  ChannelTensor h;
  Eigen::Index pos = 0;
  for (int m = 0; m < cfg.n_subcarriers; ++m)
    h.subcarriers.push_back(get_complex(z, pos, cfg.n_rx, cfg.n_tx));
  return h;
}

RVector channel_label_slice(const RVector& z, const SystemConfig& cfg, int m) {
  check_length(z, channel_label_length(cfg), "channel_label_slice");
  const Eigen::Index n = 2 * cfg.n_rx * cfg.n_tx;
  return z.segment(m * n, n);
}

Predictor predictor_of(const NeuralNet& net) {
  return [&net](const FeatureTensor& x) -> RVector {
    if (x.shape != net.spec().input)
      throw std::invalid_argument("predictor: feature shape does not match the network input");
    return net.predict(x.data).col(0);
  };
}

const char* framework_name(Framework tag) {
  switch (tag) {
    case Framework::f1: return "F1";
    case Framework::f2: return "F2";
    case Framework::f3: return "F3";
  }
  return "?";
}

FrameworkOutput run_framework(Framework tag, const FrameworkNets& nets, const ReceivedPilot& y,
                              const SystemConfig& cfg) {
  auto need = [tag](const Predictor& p, const char* name) {
    if (!p)
      throw ConfigError(std::string(framework_name(tag)) + " needs the " + name + " network");
  };
  FrameworkOutput out;
  switch (tag) {
    case Framework::f1:
      need(nets.mc_hbnet, "MC-HBNet");
      out.beams = decode_beamformer(nets.mc_hbnet(featurize_pilot(y)), cfg);
      return out;
    case Framework::f2:
      need(nets.mc_cenet, "MC-CENet");
      need(nets.hbnet, "HBNet");
      out.channel = decode_channel(nets.mc_cenet(featurize_pilot(y)), cfg);
      break;
    case Framework::f3: {
      need(nets.hbnet, "HBNet");
      if (nets.sc_cenet.size() != static_cast<std::size_t>(cfg.n_subcarriers))
        throw ConfigError("F3 needs one SC-CENet per subcarrier");
      for (const auto& p : nets.sc_cenet) need(p, "SC-CENet");
      const auto x = featurize_pilot_per_subcarrier(y);
      ChannelTensor h;
      for (int m = 0; m < cfg.n_subcarriers; ++m) {
        const RVector zm = nets.sc_cenet[m](x[m]);
        check_length(zm, 2 * cfg.n_rx * cfg.n_tx, "SC-CENet output");
        Eigen::Index pos = 0;
        h.subcarriers.push_back(get_complex(zm, pos, cfg.n_rx, cfg.n_tx));
      }
      out.channel = std::move(h);
      break;
    }
  }
  out.beams = decode_beamformer(nets.hbnet(featurize_channel(*out.channel)), cfg);
  return out;
}

}  // namespace wbhb
