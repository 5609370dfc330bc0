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

#ifndef WBHB_NEURAL_HPP
#define WBHB_NEURAL_HPP

#include "wbhb/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wbhb {

// Tensors are stored height x width x channels with the channel index
// fastest: flat index = c + C * (col + W * row). A batch is a matrix with one
// flattened sample per column.

struct Shape3 {
  int h = 1;
  int w = 1;
  int c = 1;
  int size() const { return h * w * c; }
  bool operator==(const Shape3&) const = default;
};

enum class LayerKind { conv, pool, dense, relu, dropout, regression };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int filters = 0;  // conv
  int kernel_h = 0;
  int kernel_w = 0;
  int factor = 0;   // pool (max, non-overlapping, partial edge windows kept)
  int units = 0;    // dense / regression output dimension
  double rate = 0;  // dropout

  static LayerSpec conv(int filters, int kernel_h, int kernel_w);
  static LayerSpec pool(int factor);
  static LayerSpec dense(int units);
  static LayerSpec relu();
  static LayerSpec dropout(double rate);
  static LayerSpec regression(int output_dim);

  bool has_params() const {
    return kind == LayerKind::conv || kind == LayerKind::dense || kind == LayerKind::regression;
  }
};

struct NetSpec {
  Shape3 input;
  std::vector<LayerSpec> layers;

  /// Throws std::invalid_argument if shapes do not chain, regression is not
  /// the single terminal layer, or a dropout rate is outside [0, 1).
  void validate() const;
  /// Output shape of every layer (same length as `layers`).
  std::vector<Shape3> shapes() const;
  int output_dim() const;

  /// conv 32@3x3 - relu - conv 32@3x3 - relu - dense 512 - relu - dropout 0.5 -
  /// dense 256 - relu - dropout 0.5 - regression. `pooled` adds pool(2) after
  /// each conv (the beamformer networks).
  static NetSpec standard(Shape3 input, int output_dim, bool pooled, int conv_filters = 32,
                          int dense1 = 512, int dense2 = 256, double dropout = 0.5);
};

/// Per-channel input and per-component output standardization.
struct Normalization {
  RVector in_mean;   // C
  RVector in_std;    // C
  RVector out_mean;  // output_dim
  RVector out_std;   // output_dim

  bool empty() const { return in_mean.size() == 0; }
  /// Fits from raw samples (columns). Zero spreads are replaced by one.
  static Normalization fit(const Shape3& input, const RMatrix& x, const RMatrix& y);
  RMatrix normalize_input(const RMatrix& x) const;
  RMatrix normalize_output(const RMatrix& y) const;
  RMatrix denormalize_output(const RMatrix& y) const;
};

class NeuralNet {
 public:
  NeuralNet() = default;
  /// He-normal weights from `init_seed`, zero biases.
  NeuralNet(NetSpec spec, std::uint64_t init_seed);

  const NetSpec& spec() const { return spec_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  /// Weights followed by biases of one layer; empty for parameter-free layers.
  std::span<double> layer_params(std::size_t layer);
  std::span<const double> layer_params(std::size_t layer) const;
  std::size_t layer_offset(std::size_t layer) const { return offsets_[layer]; }

  bool frozen(std::size_t layer) const { return frozen_[layer]; }
  void set_frozen(std::size_t layer, bool f) { frozen_.at(layer) = f; }
  const std::vector<bool>& frozen_mask() const { return frozen_; }
  void freeze_convolutions();

  /// Network output for normalized inputs (one sample per column).
  RMatrix forward(const RMatrix& x, bool train_mode = false, std::uint64_t seed = 0) const;

  /// Loss (1/(2B)) sum_b ||y_b - t_b||^2 and its gradient w.r.t. every
  /// parameter; frozen layers get exact zeros.
  double loss_and_gradient(const RMatrix& x, const RMatrix& target, std::vector<double>& grad,
                           bool train_mode = false, std::uint64_t seed = 0) const;
  /// Eval-mode loss, evaluated in chunks.
  double loss(const RMatrix& x, const RMatrix& target) const;

  /// Raw inputs in, raw outputs out, through the stored normalization.
  RMatrix predict(const RMatrix& raw_x) const;

  Normalization normalization;
  std::uint64_t epochs_trained = 0;

 private:
  NetSpec spec_;
  std::vector<Shape3> shapes_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
  std::vector<bool> frozen_;
};

struct TrainConfig {
  double lr = 5e-4;
  double momentum = 0.9;
  int batch_size = 128;
  double lr_decay_factor = 0.9;
  int lr_decay_every_epochs = 30;
  int early_stop_patience_epochs = 3;
  int max_epochs = 100;
  double validation_fraction = 0.2;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;  // parameters are restored to this epoch
  bool early_stopped = false;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

/// SGD with momentum on normalized data (samples in columns). Shuffles once
/// for the train/validation split and again every epoch; both from rng_seed.
/// Throws NumericalError when the loss becomes non-finite.
TrainHistory train(NeuralNet& net, const RMatrix& x, const RMatrix& y, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

/// Largest relative deviation between backprop and central differences over
/// `n_checks` parameters drawn from `seed` (all parameters when n_checks <= 0).
double gradient_check(const NeuralNet& net, const RMatrix& x, const RMatrix& target, int n_checks,
                      std::uint64_t seed, bool train_mode = false, double eps = 1e-6);

/// Checkpoint: "WBNN", u32 version, u32 descriptor length, JSON descriptor
/// (spec, frozen mask, normalization, epochs trained), u64 parameter count,
/// little-endian f64 parameters.
void save_checkpoint(const NeuralNet& net, const std::filesystem::path& path);
NeuralNet load_checkpoint(const std::filesystem::path& path);

std::string to_json_string(const NetSpec& spec);
NetSpec net_spec_from_json_string(const std::string& text);

}  // namespace wbhb

#endif  // WBHB_NEURAL_HPP
