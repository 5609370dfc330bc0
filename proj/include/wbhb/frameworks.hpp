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

#ifndef WBHB_FRAMEWORKS_HPP
#define WBHB_FRAMEWORKS_HPP

#include "wbhb/hybrid.hpp"
#include "wbhb/neural.hpp"
#include "wbhb/types.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace wbhb {

/// Real tensor of a complex matrix stack, channels (|x|, Re x, Im x), stored
/// with the layout of the neural module.
struct FeatureTensor {
  Shape3 shape{0, 0, 3};
  RVector data;

  double& at(int row, int col, int ch) { return data(ch + 3 * (col + shape.w * row)); }
  double at(int row, int col, int ch) const { return data(ch + 3 * (col + shape.w * row)); }
};

/// Stacks the matrices vertically (all must share a shape).
FeatureTensor featurize(std::span<const CMatrix> blocks);
/// Inverse of `featurize` from the Re/Im channels.
std::vector<CMatrix> complex_blocks(const FeatureTensor& x, int n_blocks);

/// (M M_R) x M_T x 3.
FeatureTensor featurize_pilot(const ReceivedPilot& y);
/// M tensors of M_R x M_T x 3.
std::vector<FeatureTensor> featurize_pilot_per_subcarrier(const ReceivedPilot& y);
/// (M N_R) x N_T x 3.
FeatureTensor featurize_channel(const ChannelTensor& h);

/// N_RF (N_T + N_R + 4 M N_S): both baseband matrices of every subcarrier.
int beamformer_label_length(const SystemConfig& cfg);
int channel_label_length(const SystemConfig& cfg);

/// Phases of vec F_RF and vec W_RF in (-pi, pi], then per subcarrier
/// [Re vec F_BB; Im vec F_BB; Re vec W_BB; Im vec W_BB].
RVector encode_beamformer(const HybridBeamformer& b);
/// Unit-modulus analog parts from the phases; F_BB rescaled so that
/// sum_m ||F_RF F_BB[m]||_F^2 = M N_S.
HybridBeamformer decode_beamformer(const RVector& z, const SystemConfig& cfg);

/// Per subcarrier [Re vec H[m]; Im vec H[m]].
RVector encode_channel(const ChannelTensor& h);
ChannelTensor decode_channel(const RVector& z, const SystemConfig& cfg);
/// Slice of a channel label holding subcarrier m.
RVector channel_label_slice(const RVector& z, const SystemConfig& cfg, int m);

enum class Framework { f1, f2, f3 };

/// Raw features in, raw label out.
using Predictor = std::function<RVector(const FeatureTensor&)>;

/// Wraps a trained net (through its stored normalization).
Predictor predictor_of(const NeuralNet& net);

struct FrameworkNets {
  Predictor mc_hbnet;
  Predictor mc_cenet;
  Predictor hbnet;
  std::vector<Predictor> sc_cenet;  // one per subcarrier
};

struct FrameworkOutput {
  std::optional<ChannelTensor> channel;  // empty for F1
  HybridBeamformer beams;
};

/// Throws ConfigError when a net needed by `tag` is missing.
FrameworkOutput run_framework(Framework tag, const FrameworkNets& nets, const ReceivedPilot& y,
                              const SystemConfig& cfg);

const char* framework_name(Framework tag);

}  // namespace wbhb

#endif  // WBHB_FRAMEWORKS_HPP
