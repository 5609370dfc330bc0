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

#include "wbhb/neural.hpp"

#include "binary_io.hpp"
#include "wbhb/errors.hpp"
#include "wbhb/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace wbhb {

using json = nlohmann::json;

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr Eigen::Index kEvalChunk = 256;

// Uniform double in [0, 1) from the top 53 bits.
double unit_uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void shuffle(std::vector<Eigen::Index>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

int pad_before(int k) { return (k - 1) / 2; }
int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::size_t layer_param_count(const LayerSpec& l, const Shape3& in) {
  switch (l.kind) {
    case LayerKind::conv:
      return static_cast<std::size_t>(l.filters) * (l.kernel_h * l.kernel_w * in.c + 1);
    case LayerKind::dense:
    case LayerKind::regression:
      return static_cast<std::size_t>(l.units) * (in.size() + 1);
    default:
      return 0;
  }
}

struct Cache {
  std::vector<RMatrix> acts;  // acts[0] input, acts[l + 1] output of layer l
  std::vector<RMatrix> cols;  // conv im2col buffers
  std::vector<std::vector<int>> argmax;
  std::vector<RMatrix> masks;
};

void im2col(const RMatrix& x, const Shape3& s, int kh, int kw, RMatrix& cols) {
  const Eigen::Index batch = x.cols();
  const int hw = s.h * s.w;
  const int k = kh * kw * s.c;
  cols.resize(k, static_cast<Eigen::Index>(hw) * batch);
  const int pt = pad_before(kh);
  const int pl = pad_before(kw);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double* src = x.col(b).data();
    for (int r = 0; r < s.h; ++r)
      for (int q = 0; q < s.w; ++q) {
        double* dst = cols.col(q + s.w * r + hw * b).data();
        for (int dr = 0; dr < kh; ++dr) {
          const int rs = r + dr - pt;
          for (int dq = 0; dq < kw; ++dq) {
            const int qs = q + dq - pl;
            double* d = dst + s.c * (dq + kw * dr);
            if (rs < 0 || rs >= s.h || qs < 0 || qs >= s.w)
              std::fill(d, d + s.c, 0.0);
            else
              std::copy_n(src + s.c * (qs + s.w * rs), s.c, d);
          }
        }
      }
  }
}

void col2im(const RMatrix& cols, const Shape3& s, int kh, int kw, Eigen::Index batch, RMatrix& dx) {
  const int hw = s.h * s.w;
  dx.setZero(s.size(), batch);
  const int pt = pad_before(kh);
  const int pl = pad_before(kw);
  for (Eigen::Index b = 0; b < batch; ++b) {
    double* dst = dx.col(b).data();
    for (int r = 0; r < s.h; ++r)
      for (int q = 0; q < s.w; ++q) {
        const double* src = cols.col(q + s.w * r + hw * b).data();
        for (int dr = 0; dr < kh; ++dr) {
          const int rs = r + dr - pt;
          if (rs < 0 || rs >= s.h) continue;
          for (int dq = 0; dq < kw; ++dq) {
            const int qs = q + dq - pl;
            if (qs < 0 || qs >= s.w) continue;
            const double* sp = src + s.c * (dq + kw * dr);
            double* dp = dst + s.c * (qs + s.w * rs);
            for (int c = 0; c < s.c; ++c) dp[c] += sp[c];
          }
        }
      }
  }
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::pool: return "pool";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::regression: return "regression";
  }
  return "?";
}

LayerKind kind_from_name(const std::string& n) {
  for (LayerKind k : {LayerKind::conv, LayerKind::pool, LayerKind::dense, LayerKind::relu,
                      LayerKind::dropout, LayerKind::regression})
    if (n == kind_name(k)) return k;
  throw std::invalid_argument("unknown layer type \"" + n + "\"");
}

json spec_to_json(const NetSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    json j = {{"type", kind_name(l.kind)}};
    switch (l.kind) {
      case LayerKind::conv:
        j["filters"] = l.filters;
        j["kernel"] = {l.kernel_h, l.kernel_w};
        break;
      case LayerKind::pool: j["factor"] = l.factor; break;
      case LayerKind::dense:
      case LayerKind::regression: j["units"] = l.units; break;
      case LayerKind::dropout: j["rate"] = l.rate; break;
      case LayerKind::relu: break;
    }
    layers.push_back(j);
  }
  return {{"input", {spec.input.h, spec.input.w, spec.input.c}}, {"layers", layers}};
}

NetSpec spec_from_json(const json& j) {
  NetSpec s;
  const auto& in = j.at("input");
  s.input = {in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};
  for (const auto& l : j.at("layers")) {
    LayerSpec ls;
    ls.kind = kind_from_name(l.at("type").get<std::string>());
    switch (ls.kind) {
      case LayerKind::conv:
        ls.filters = l.at("filters").get<int>();
        ls.kernel_h = l.at("kernel").at(0).get<int>();
        ls.kernel_w = l.at("kernel").at(1).get<int>();
        break;
      case LayerKind::pool: ls.factor = l.at("factor").get<int>(); break;
      case LayerKind::dense:
      case LayerKind::regression: ls.units = l.at("units").get<int>(); break;
      case LayerKind::dropout: ls.rate = l.at("rate").get<double>(); break;
      case LayerKind::relu: break;
    }
    s.layers.push_back(ls);
  }
  s.validate();
  return s;
}

json vec_to_json(const RVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
RVector vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const RVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

// ---- specs ---------------------------------------------------------------------

LayerSpec LayerSpec::conv(int filters, int kernel_h, int kernel_w) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.filters = filters;
  l.kernel_h = kernel_h;
  l.kernel_w = kernel_w;
  return l;
}
LayerSpec LayerSpec::pool(int factor) {
  LayerSpec l;
  l.kind = LayerKind::pool;
  l.factor = factor;
  return l;
}
LayerSpec LayerSpec::dense(int units) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.units = units;
  return l;
}
LayerSpec LayerSpec::relu() { return LayerSpec{}; }
LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::dropout;
  l.rate = rate;
  return l;
}
LayerSpec LayerSpec::regression(int output_dim) {
  LayerSpec l;
  l.kind = LayerKind::regression;
  l.units = output_dim;
  return l;
}

std::vector<Shape3> NetSpec::shapes() const {
  std::vector<Shape3> out;
  Shape3 s = input;
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::conv: s.c = l.filters; break;
      case LayerKind::pool: s = {ceil_div(s.h, l.factor), ceil_div(s.w, l.factor), s.c}; break;
      case LayerKind::dense:
      case LayerKind::regression: s = {1, 1, l.units}; break;
      case LayerKind::relu:
      case LayerKind::dropout: break;
    }
    out.push_back(s);
  }
  return out;
}

void NetSpec::validate() const {
  if (input.h < 1 || input.w < 1 || input.c < 1)
    throw std::invalid_argument("NetSpec: input shape must be positive");
  if (layers.empty() || layers.back().kind != LayerKind::regression)
    throw std::invalid_argument("NetSpec: the last layer must be regression");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string at = "NetSpec: layer " + std::to_string(i) + " (" + kind_name(l.kind) + ")";
    if (l.kind == LayerKind::regression && i + 1 != layers.size())
      throw std::invalid_argument(at + " must be terminal");
    if (l.kind == LayerKind::conv && (l.filters < 1 || l.kernel_h < 1 || l.kernel_w < 1))
      throw std::invalid_argument(at + ": filters and kernel must be positive");
    if (l.kind == LayerKind::pool && l.factor < 1)
      throw std::invalid_argument(at + ": factor must be positive");
    if ((l.kind == LayerKind::dense || l.kind == LayerKind::regression) && l.units < 1)
      throw std::invalid_argument(at + ": units must be positive");
    if (l.kind == LayerKind::dropout && !(l.rate >= 0.0 && l.rate < 1.0))
      throw std::invalid_argument(at + ": rate must be in [0, 1)");
  }
}

int NetSpec::output_dim() const { return layers.empty() ? 0 : shapes().back().size(); }

NetSpec NetSpec::standard(Shape3 input, int output_dim, bool pooled, int conv_filters, int dense1,
                          int dense2, double dropout) {
  NetSpec s;
  s.input = input;
  for (int i = 0; i < 2; ++i) {
    s.layers.push_back(LayerSpec::conv(conv_filters, 3, 3));
    if (pooled) s.layers.push_back(LayerSpec::pool(2));
    s.layers.push_back(LayerSpec::relu());
  }
  for (int units : {dense1, dense2}) {
    s.layers.push_back(LayerSpec::dense(units));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::dropout(dropout));
  }
  s.layers.push_back(LayerSpec::regression(output_dim));
  s.validate();
  return s;
}

// ---- normalization -------------------------------------------------------------

Normalization Normalization::fit(const Shape3& input, const RMatrix& x, const RMatrix& y) {
  if (x.rows() != input.size()) throw std::invalid_argument("Normalization: feature size mismatch");
  if (x.cols() == 0) throw std::invalid_argument("Normalization: no samples");
  Normalization n;
  const auto c = input.c;
  const Eigen::Index per = static_cast<Eigen::Index>(input.h) * input.w * x.cols();
  Eigen::Map<const RMatrix> xc(x.data(), c, per);
  n.in_mean = xc.rowwise().mean();
  n.in_std = ((xc.colwise() - n.in_mean).array().square().rowwise().sum() / static_cast<double>(per)).sqrt();
  n.out_mean = y.rowwise().mean();
  n.out_std = ((y.colwise() - n.out_mean).array().square().rowwise().sum() / static_cast<double>(y.cols())).sqrt();
  for (auto* v : {&n.in_std, &n.out_std})
    for (Eigen::Index i = 0; i < v->size(); ++i)
      if (!((*v)(i) > 1e-12)) (*v)(i) = 1.0;
  return n;
}

RMatrix Normalization::normalize_input(const RMatrix& x) const {
  if (empty()) return x;
  const auto c = in_mean.size();
  RMatrix out = x;
  Eigen::Map<RMatrix> oc(out.data(), c, out.size() / c);
  oc = ((oc.colwise() - in_mean).array().colwise() / in_std.array()).matrix();
  return out;
}

RMatrix Normalization::normalize_output(const RMatrix& y) const {
  if (out_mean.size() == 0) return y;
  return ((y.colwise() - out_mean).array().colwise() / out_std.array()).matrix();
}

RMatrix Normalization::denormalize_output(const RMatrix& y) const {
  if (out_mean.size() == 0) return y;
  return ((y.array().colwise() * out_std.array()).matrix().colwise() + out_mean);
}

// ---- network -------------------------------------------------------------------

NeuralNet::NeuralNet(NetSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
  spec_.validate();
  shapes_ = spec_.shapes();
  std::size_t total = 0;
  Shape3 in = spec_.input;
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    offsets_.push_back(total);
    total += layer_param_count(spec_.layers[l], in);
    in = shapes_[l];
  }
  offsets_.push_back(total);
  params_.assign(total, 0.0);
  frozen_.assign(spec_.layers.size(), false);

  in = spec_.input;
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    const auto& ls = spec_.layers[l];
    if (ls.has_params()) {
      const double fan_in = ls.kind == LayerKind::conv
                                ? static_cast<double>(ls.kernel_h * ls.kernel_w * in.c)
                                : static_cast<double>(in.size());
      const double stdev = std::sqrt((ls.kind == LayerKind::regression ? 1.0 : 2.0) / fan_in);
      const std::size_t n_out = ls.kind == LayerKind::conv ? ls.filters : ls.units;
      const std::size_t n_w = layer_param_count(ls, in) - n_out;
      Rng rng(derive_seed(init_seed, {l}));
      std::normal_distribution<double> nd(0.0, stdev);
      for (std::size_t i = 0; i < n_w; ++i) params_[offsets_[l] + i] = nd(rng);
    }
    in = shapes_[l];
  }
}

std::span<double> NeuralNet::layer_params(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_[layer], offsets_[layer + 1] - offsets_[layer]);
}

std::span<const double> NeuralNet::layer_params(std::size_t layer) const {
  return std::span<const double>(params_).subspan(offsets_[layer], offsets_[layer + 1] - offsets_[layer]);
}

void NeuralNet::freeze_convolutions() {
  for (std::size_t l = 0; l < spec_.layers.size(); ++l)
    if (spec_.layers[l].kind == LayerKind::conv) frozen_[l] = true;
}

namespace {

void run_forward(const NetSpec& spec, const std::vector<Shape3>& shapes,
                 const std::vector<std::size_t>& offsets, const std::vector<double>& params,
                 const RMatrix& x, bool train_mode, std::uint64_t seed, Cache& cache) {
  if (x.rows() != spec.input.size())
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) +
                                " rows, network expects " + std::to_string(spec.input.size()));
  const Eigen::Index batch = x.cols();
  const std::size_t n = spec.layers.size();
  cache.acts.resize(n + 1);
  cache.cols.resize(n);
  cache.argmax.resize(n);
  cache.masks.resize(n);
  cache.acts[0] = x;
  Shape3 in = spec.input;
  for (std::size_t l = 0; l < n; ++l) {
    const auto& ls = spec.layers[l];
    const Shape3& out_s = shapes[l];
    const RMatrix& a = cache.acts[l];
    RMatrix& y = cache.acts[l + 1];
    const double* p = params.data() + offsets[l];
    switch (ls.kind) {
      case LayerKind::conv: {
        const int k = ls.kernel_h * ls.kernel_w * in.c;
        im2col(a, in, ls.kernel_h, ls.kernel_w, cache.cols[l]);
        Eigen::Map<const RMatrix> w(p, ls.filters, k);
        Eigen::Map<const RVector> bias(p + static_cast<std::size_t>(ls.filters) * k, ls.filters);
        y.resize(out_s.size(), batch);
        Eigen::Map<RMatrix> ym(y.data(), ls.filters, cache.cols[l].cols());
        ym.noalias() = w * cache.cols[l];
        ym.colwise() += bias;
        break;
      }
      case LayerKind::pool: {
        const int f = ls.factor;
        y.resize(out_s.size(), batch);
        auto& am = cache.argmax[l];
        am.resize(static_cast<std::size_t>(y.size()));
        for (Eigen::Index b = 0; b < batch; ++b)
          for (int ro = 0; ro < out_s.h; ++ro)
            for (int qo = 0; qo < out_s.w; ++qo)
              for (int c = 0; c < in.c; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                int arg = -1;
                for (int r = ro * f; r < std::min(in.h, ro * f + f); ++r)
                  for (int q = qo * f; q < std::min(in.w, qo * f + f); ++q) {
                    const int idx = c + in.c * (q + in.w * r);
                    if (a(idx, b) > best || arg < 0) {
                      best = a(idx, b);
                      arg = idx;
                    }
                  }
                const int oidx = c + in.c * (qo + out_s.w * ro);
                y(oidx, b) = best;
                am[static_cast<std::size_t>(oidx + out_s.size() * b)] = arg;
              }
        break;
      }
      case LayerKind::dense:
      case LayerKind::regression: {
        Eigen::Map<const RMatrix> w(p, ls.units, a.rows());
        Eigen::Map<const RVector> bias(p + static_cast<std::size_t>(ls.units) * a.rows(), ls.units);
        y.noalias() = w * a;
        y.colwise() += bias;
        break;
      }
      case LayerKind::relu:
        y = a.cwiseMax(0.0);
        break;
      case LayerKind::dropout: {
        if (!train_mode || ls.rate == 0.0) {
          y = a;
          cache.masks[l].resize(0, 0);
          break;
        }
        const double keep = 1.0 - ls.rate;
        RMatrix& m = cache.masks[l];
        m.resize(a.rows(), a.cols());
        Rng rng(derive_seed(seed, {0xd70f, l}));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unit_uniform(rng) < keep ? 1.0 / keep : 0.0;
        y = a.cwiseProduct(m);
        break;
      }
    }
    in = out_s;
  }
}

}  // namespace

RMatrix NeuralNet::forward(const RMatrix& x, bool train_mode, std::uint64_t seed) const {
  Cache cache;
  run_forward(spec_, shapes_, offsets_, params_, x, train_mode, seed, cache);
  return std::move(cache.acts.back());
}

double NeuralNet::loss_and_gradient(const RMatrix& x, const RMatrix& target, std::vector<double>& grad,
                                    bool train_mode, std::uint64_t seed) const {
  Cache cache;
  run_forward(spec_, shapes_, offsets_, params_, x, train_mode, seed, cache);
  const RMatrix& out = cache.acts.back();
  if (target.rows() != out.rows() || target.cols() != out.cols())
    throw std::invalid_argument("loss: target shape does not match the network output");
  const double batch = static_cast<double>(x.cols());
  RMatrix delta = (out - target) / batch;
  const double loss = 0.5 * (out - target).squaredNorm() / batch;

  grad.assign(params_.size(), 0.0);
  const std::size_t n = spec_.layers.size();
  for (std::size_t li = n; li-- > 0;) {
    const auto& ls = spec_.layers[li];
    const Shape3 in = li == 0 ? spec_.input : shapes_[li - 1];
    const RMatrix& a = cache.acts[li];
    const double* p = params_.data() + offsets_[li];
    double* g = grad.data() + offsets_[li];
    const bool need_input_grad = li > 0;
    RMatrix d_in;
    switch (ls.kind) {
      case LayerKind::conv: {
        const int k = ls.kernel_h * ls.kernel_w * in.c;
        const RMatrix& cols = cache.cols[li];
        Eigen::Map<const RMatrix> dy(delta.data(), ls.filters, cols.cols());
        if (!frozen_[li]) {
          Eigen::Map<RMatrix> gw(g, ls.filters, k);
          Eigen::Map<RVector> gb(g + static_cast<std::size_t>(ls.filters) * k, ls.filters);
          gw.noalias() = dy * cols.transpose();
          gb = dy.rowwise().sum();
        }
        if (need_input_grad) {
          Eigen::Map<const RMatrix> w(p, ls.filters, k);
          const RMatrix dcols = w.transpose() * dy;
          col2im(dcols, in, ls.kernel_h, ls.kernel_w, x.cols(), d_in);
        }
        break;
      }
      case LayerKind::pool: {
        if (need_input_grad) {
          d_in.setZero(in.size(), x.cols());
          const auto& am = cache.argmax[li];
          const auto out_size = delta.rows();
          for (Eigen::Index b = 0; b < delta.cols(); ++b)
            for (Eigen::Index i = 0; i < out_size; ++i)
              d_in(am[static_cast<std::size_t>(i + out_size * b)], b) += delta(i, b);
        }
        break;
      }
      case LayerKind::dense:
      case LayerKind::regression: {
        if (!frozen_[li]) {
          Eigen::Map<RMatrix> gw(g, ls.units, a.rows());
          Eigen::Map<RVector> gb(g + static_cast<std::size_t>(ls.units) * a.rows(), ls.units);
          gw.noalias() = delta * a.transpose();
          gb = delta.rowwise().sum();
        }
        if (need_input_grad) {
          Eigen::Map<const RMatrix> w(p, ls.units, a.rows());
          d_in.noalias() = w.transpose() * delta;
        }
        break;
      }
      case LayerKind::relu:
        if (need_input_grad) d_in = delta.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
        break;
      case LayerKind::dropout:
        if (need_input_grad) d_in = cache.masks[li].size() == 0 ? delta : RMatrix(delta.cwiseProduct(cache.masks[li]));
        break;
    }
    delta = std::move(d_in);
  }
  return loss;
}

double NeuralNet::loss(const RMatrix& x, const RMatrix& target) const {
  if (x.cols() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index s = 0; s < x.cols(); s += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, x.cols() - s);
    const RMatrix out = forward(x.middleCols(s, len));
    total += 0.5 * (out - target.middleCols(s, len)).squaredNorm();
  }
  return total / static_cast<double>(x.cols());
}

RMatrix NeuralNet::predict(const RMatrix& raw_x) const {
  const RMatrix xn = normalization.normalize_input(raw_x);
  RMatrix out(spec_.output_dim(), raw_x.cols());
  for (Eigen::Index s = 0; s < raw_x.cols(); s += kEvalChunk) {
    const Eigen::Index len = std::min(kEvalChunk, raw_x.cols() - s);
    out.middleCols(s, len) = forward(xn.middleCols(s, len));
  }
  return normalization.denormalize_output(out);
}

// ---- training ------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("TrainConfig: lr_decay_factor must be positive");
  if (lr_decay_every_epochs < 1) throw std::invalid_argument("TrainConfig: lr_decay_every_epochs must be >= 1");
  if (early_stop_patience_epochs < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("TrainConfig: validation_fraction must be in [0, 1)");
}

TrainHistory train(NeuralNet& net, const RMatrix& x, const RMatrix& y, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
  cfg.validate();
  if (x.cols() == 0) throw std::invalid_argument("train: empty dataset");
  if (x.cols() != y.cols()) throw std::invalid_argument("train: feature and label counts differ");
  if (x.rows() != net.spec().input.size() || y.rows() != net.spec().output_dim())
    throw std::invalid_argument("train: sample shapes do not match the network");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng split_rng(derive_seed(cfg.rng_seed, {0x5b11}));
  shuffle(order, split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(order.size())));
  if (cfg.validation_fraction > 0.0 && order.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
  if (order.size() < 2) n_val = 0;
  std::vector<Eigen::Index> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  const std::vector<Eigen::Index> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  const RMatrix x_val = x(Eigen::all, val_idx);
  const RMatrix y_val = y(Eigen::all, val_idx);

  auto params = net.params();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> grad;
  std::vector<double> best(params.begin(), params.end());
  std::vector<char> trainable(params.size(), 1);
  for (std::size_t l = 0; l < net.spec().layers.size(); ++l)
    if (net.frozen(l))
      std::fill(trainable.begin() + static_cast<std::ptrdiff_t>(net.layer_offset(l)),
                trainable.begin() + static_cast<std::ptrdiff_t>(net.layer_offset(l + 1)), 0);

  TrainHistory hist;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every_epochs);
    Rng epoch_rng(derive_seed(cfg.rng_seed, {0xe70c, static_cast<std::uint64_t>(epoch)}));
    shuffle(train_idx, epoch_rng);

    double sum = 0.0;
    for (std::size_t s = 0, batch = 0; s < train_idx.size(); s += cfg.batch_size, ++batch) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, train_idx.size() - s);
      const std::vector<Eigen::Index> idx(train_idx.begin() + static_cast<std::ptrdiff_t>(s),
                                          train_idx.begin() + static_cast<std::ptrdiff_t>(s + len));
      const RMatrix xb = x(Eigen::all, idx);
      const RMatrix yb = y(Eigen::all, idx);
      const double l = net.loss_and_gradient(
          xb, yb, grad, true, derive_seed(cfg.rng_seed, {static_cast<std::uint64_t>(epoch), batch}));
      if (!std::isfinite(l)) throw NumericalError("train: loss diverged", epoch);
      sum += l * static_cast<double>(len);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable[i]) continue;
        velocity[i] = cfg.momentum * velocity[i] - lr * grad[i];
        params[i] += velocity[i];
      }
    }
    const double tr = sum / static_cast<double>(train_idx.size());
    const double va = n_val > 0 ? net.loss(x_val, y_val) : tr;
    if (!std::isfinite(va)) throw NumericalError("train: validation loss diverged", epoch);
    hist.train_loss.push_back(tr);
    hist.val_loss.push_back(va);
    ++net.epochs_trained;
    if (on_epoch) on_epoch(epoch, tr, va);

    if (va < best_loss) {
      best_loss = va;
      hist.best_epoch = epoch;
      std::copy(params.begin(), params.end(), best.begin());
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience_epochs) {
      hist.early_stopped = true;
      break;
    }
  }
  if (hist.best_epoch >= 0) std::copy(best.begin(), best.end(), params.begin());
  return hist;
}

double gradient_check(const NeuralNet& net, const RMatrix& x, const RMatrix& target, int n_checks,
                      std::uint64_t seed, bool train_mode, double eps) {
  std::vector<double> grad;
  net.loss_and_gradient(x, target, grad, train_mode, seed);
  std::vector<std::size_t> idx;
  const std::size_t n = net.param_count();
  if (n_checks <= 0 || static_cast<std::size_t>(n_checks) >= n) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  } else {
    Rng rng(seed);
    for (int i = 0; i < n_checks; ++i) idx.push_back(static_cast<std::size_t>(rng() % n));
  }
  double gmax = 0.0;
  for (double g : grad) gmax = std::max(gmax, std::abs(g));
  NeuralNet probe = net;
  std::vector<double> scratch;
  double worst = 0.0;
  for (std::size_t i : idx) {
    if (grad[i] == 0.0 && probe.frozen_mask().empty()) continue;
    const double orig = probe.params()[i];
    probe.params()[i] = orig + eps;
    const double fp = probe.loss_and_gradient(x, target, scratch, train_mode, seed);
    probe.params()[i] = orig - eps;
    const double fm = probe.loss_and_gradient(x, target, scratch, train_mode, seed);
    probe.params()[i] = orig;
    bool frozen_param = false;
    for (std::size_t l = 0; l < net.spec().layers.size(); ++l)
      if (net.frozen(l) && i >= net.layer_offset(l) && i < net.layer_offset(l + 1)) frozen_param = true;
    const double fd = frozen_param ? 0.0 : (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-7 * std::max(gmax, 1e-300)});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

// ---- checkpoint ----------------------------------------------------------------

std::string to_json_string(const NetSpec& spec) { return spec_to_json(spec).dump(); }

NetSpec net_spec_from_json_string(const std::string& text) {
  try {
    return spec_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("NetSpec JSON: ") + e.what());
  }
}

void save_checkpoint(const NeuralNet& net, const std::filesystem::path& path) {
  json desc = spec_to_json(net.spec());
  desc["frozen"] = net.frozen_mask();
  desc["epochs_trained"] = net.epochs_trained;
  const auto& nm = net.normalization;
  if (!nm.empty())
    desc["normalization"] = {{"in_mean", vec_to_json(nm.in_mean)},
                             {"in_std", vec_to_json(nm.in_std)},
                             {"out_mean", vec_to_json(nm.out_mean)},
                             {"out_std", vec_to_json(nm.out_std)}};
  const std::string text = desc.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  io::put_magic(os, "WBNN");
  io::put_u32(os, kCheckpointVersion);
  io::put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  io::put_u64(os, net.param_count());
  for (double p : net.params()) io::put_f64(os, p);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

NeuralNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  io::expect_magic(is, "WBNN", path.string());
  const auto version = io::get_u32(is);
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = io::get_u32(is);
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw FormatError(path.string() + ": truncated descriptor");

  json desc;
  NetSpec spec;
  try {
    desc = json::parse(text);
    spec = spec_from_json(desc);
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": bad descriptor: " + e.what());
  }
  NeuralNet net(spec, 0);
  const auto count = io::get_u64(is);
  if (count != net.param_count())
    throw FormatError(path.string() + ": parameter count " + std::to_string(count) +
                      " does not match the descriptor (" + std::to_string(net.param_count()) + ")");
  for (auto& p : net.params()) p = io::get_f64(is);
  const auto frozen = desc.value("frozen", std::vector<bool>(spec.layers.size(), false));
  if (frozen.size() != spec.layers.size()) throw FormatError(path.string() + ": frozen mask length mismatch");
  for (std::size_t l = 0; l < frozen.size(); ++l) net.set_frozen(l, frozen[l]);
  net.epochs_trained = desc.value("epochs_trained", std::uint64_t{0});
  if (desc.contains("normalization")) {
    const auto& n = desc["normalization"];
    net.normalization.in_mean = vec_from_json(n.at("in_mean"));
    net.normalization.in_std = vec_from_json(n.at("in_std"));
    net.normalization.out_mean = vec_from_json(n.at("out_mean"));
    net.normalization.out_std = vec_from_json(n.at("out_std"));
  }
  return net;
}

}  // namespace wbhb
