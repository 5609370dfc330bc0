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

#include <catch2/catch_amalgamated.hpp>

#include "wbhb/channel.hpp"
#include "wbhb/chest.hpp"
#include "wbhb/dataset.hpp"
#include "wbhb/errors.hpp"
#include "wbhb/frameworks.hpp"
#include "wbhb/online.hpp"
#include "wbhb/random.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

using namespace wbhb;

namespace {

struct Fixture {
  GenerationConfig gen;
  NeuralNet ce;
  NeuralNet hb;
  OnlineConfig online;
  ChannelScenario scenario;
};

Fixture make_fixture() {
  Fixture f;
  f.gen.sys.n_tx = 16;
  f.gen.sys.n_rx = 4;
  f.gen.sys.n_rf = 2;
  f.gen.sys.n_streams = 2;
  f.gen.sys.n_subcarriers = 4;
  f.gen.sys.unit_gain = true;
  f.gen.pilot.m_tx = 8;
  f.gen.pilot.m_rx = 4;
  f.gen.clusters = 3;
  f.gen.rays_per_cluster = 2;
  f.gen.n_scenarios = 4;
  f.gen.g_per_scenario = 5;
  f.gen.seed = 5;
  f.gen.threads = 1;
  const GeneratedData d = generate_datasets(f.gen);
  f.ce = NeuralNet(NetSpec::standard(d.mc_cenet.feature_shape, d.mc_cenet.label_length, false, 2, 16, 8, 0.0), 1);
  f.ce.normalization = d.mc_cenet.normalization();
  f.hb = NeuralNet(NetSpec::standard(d.hbnet.feature_shape, d.hbnet.label_length, true, 2, 16, 8, 0.0), 2);
  f.hb.normalization = d.hbnet.normalization();
  f.online.sys = f.gen.sys;
  f.online.pilot = f.gen.pilot;
  f.online.adce_grid = AngleGrid::defaults(f.gen.sys, f.gen.clusters, f.gen.rays_per_cluster);
  f.online.g_online = 20;
  f.online.train.batch_size = 8;
  f.online.seed = 9;
  f.scenario = dataset_scenario(f.gen, 0);
  return f;
}

ReceivedPilot observe(const Fixture& f, const ChannelTensor& h, std::uint64_t seed) {
  PilotConfig pc = f.gen.pilot;
  pc.snr_pilot_db = 30.0;
  return receive_pilots(h, f.gen.sys, pc, seed);
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("eta metric", "[online]") {
  SystemConfig cfg;
  cfg.n_tx = 6;
  cfg.n_rx = 3;
  cfg.n_subcarriers = 4;
  Rng rng(3);
  ChannelTensor a;
  ChannelTensor b;
  for (int m = 0; m < 4; ++m) {
    a.subcarriers.push_back(complex_normal_matrix(rng, 3, 6));
    b.subcarriers.push_back(complex_normal_matrix(rng, 3, 6));
  }
  CHECK(eta_metric(a, a) == 0.0);

  ChannelTensor shifted = a;
  for (int m = 0; m < 4; ++m) {
    CMatrix e = complex_normal_matrix(rng, 3, 6);
    shifted[m] += 0.25 * e / e.norm();
  }
  CHECK(eta_metric(shifted, a) == Catch::Approx(0.25 / 18.0).epsilon(1e-12));

  double s = 0.0;
  for (int m = 0; m < 4; ++m) {
    double f2 = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j) f2 += std::norm(a[m](i, j) - b[m](i, j));
    s += std::sqrt(f2);
  }
  CHECK(std::abs(eta_metric(a, b) - s / (4.0 * 3.0 * 6.0)) <= 1e-12 * s);

  ChannelTensor c = a;
  c.subcarriers.pop_back();
  CHECK_THROWS_AS(eta_metric(a, c), std::invalid_argument);
}

TEST_CASE("infinite threshold never updates", "[online]") {
  Fixture f = make_fixture();
  f.online.zeta = kNoNoise;
  OnlineState st(f.ce, f.hb, f.online);
  const ChannelTensor h = frequency_channel(f.gen.sys, f.scenario);
  st.initialize(observe(f, h, 100));
  for (int t = 0; t < 100; ++t) {
    const OnlineStepResult r = st.step(observe(f, h, 101 + t), &h);
    CHECK_FALSE(r.log.updated);
    CHECK(std::isnan(r.log.eta_after));
    CHECK(std::isfinite(r.log.nmse));
  }
  CHECK(st.updates() == 0);
  CHECK(st.adce_calls() == 1);
  CHECK(same_bits(st.mc_cenet().params(), f.ce.params()));
  CHECK(same_bits(st.hbnet().params(), f.hb.params()));
  CHECK(st.history().size() == 100);
}

TEST_CASE("a tiny threshold refreshes on every step", "[online]") {
  Fixture f = make_fixture();
  f.online.zeta = 1e-12;
  OnlineState st(f.ce, f.hb, f.online);
  const ChannelTensor h = frequency_channel(f.gen.sys, f.scenario);
  st.initialize(observe(f, h, 200));
  for (int t = 0; t < 3; ++t) {
    const OnlineStepResult r = st.step(observe(f, h, 201 + t), &h);
    CHECK(r.log.updated);
    CHECK(r.log.eta_after < r.log.eta_refreshed);
  }
  CHECK(st.updates() == 3);
  CHECK(st.adce_calls() == st.updates() + 1);
  for (std::size_t l = 0; l < f.ce.spec().layers.size(); ++l) {
    const auto kind = f.ce.spec().layers[l].kind;
    if (kind == LayerKind::conv) {
      CHECK(same_bits(st.mc_cenet().layer_params(l), f.ce.layer_params(l)));
    } else if (f.ce.spec().layers[l].has_params()) {
      CHECK_FALSE(same_bits(st.mc_cenet().layer_params(l), f.ce.layer_params(l)));
    }
  }
  for (std::size_t l = 0; l < f.hb.spec().layers.size(); ++l)
    if (f.hb.spec().layers[l].kind == LayerKind::conv)
      CHECK(same_bits(st.hbnet().layer_params(l), f.hb.layer_params(l)));
  CHECK_FALSE(same_bits(st.hbnet().params(), f.hb.params()));
}

TEST_CASE("the stored estimate changes only on updates", "[online]") {
  Fixture f = make_fixture();
  const ChannelTensor h = frequency_channel(f.gen.sys, f.scenario);
  const ReceivedPilot y0 = observe(f, h, 300);
  // A threshold between the first two step values gives one update.
  f.online.zeta = kNoNoise;
  OnlineState probe(f.ce, f.hb, f.online);
  probe.initialize(y0);
  const ChannelTensor temp0 = probe.h_temp();
  CHECK(nmse(adce_estimate(y0, training_beamformers(f.gen.sys, f.gen.pilot), f.online.adce_grid), temp0) == 0.0);
  const double eta0 = probe.step(observe(f, h, 301)).log.eta;
  for (int t = 0; t < 5; ++t) probe.step(observe(f, h, 302 + t));
  CHECK(nmse(temp0, probe.h_temp()) == 0.0);

  f.online.zeta = eta0 * 0.5;
  OnlineState st(f.ce, f.hb, f.online);
  st.initialize(y0);
  const OnlineStepResult r = st.step(observe(f, h, 301));
  CHECK(r.log.updated);
  CHECK(r.log.eta == eta0);
  CHECK(nmse(temp0, st.h_temp()) > 0.0);
}

TEST_CASE("online runs are deterministic", "[online]") {
  Fixture f = make_fixture();
  f.online.zeta = 1e-12;
  const ChannelTensor h = frequency_channel(f.gen.sys, f.scenario);
  auto run = [&] {
    OnlineState st(f.ce, f.hb, f.online);
    st.initialize(observe(f, h, 400));
    for (int t = 0; t < 2; ++t) st.step(observe(f, h, 401 + t), &h);
    std::ostringstream os;
    write_online_csv(os, st.history(), f.online.zeta, "abc");
    return std::make_pair(os.str(), std::vector<double>(st.hbnet().params().begin(), st.hbnet().params().end()));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.rfind("# config_hash abc\nstep,eta,zeta,updated,eta_refreshed,eta_after,nmse,rate\n0,", 0) == 0);
}

TEST_CASE("online input validation", "[online]") {
  Fixture f = make_fixture();
  const ChannelTensor h = frequency_channel(f.gen.sys, f.scenario);
  OnlineConfig bad = f.online;
  bad.zeta = 0.0;
  CHECK_THROWS_AS(OnlineState(f.ce, f.hb, bad), ConfigError);
  CHECK_THROWS_AS(OnlineState(f.hb, f.ce, f.online), ConfigError);

  OnlineState st(f.ce, f.hb, f.online);
  CHECK_THROWS_AS(st.step(observe(f, h, 1)), std::logic_error);
  ReceivedPilot y = observe(f, h, 2);
  y.subcarriers.pop_back();
  CHECK_THROWS_AS(st.initialize(y), std::invalid_argument);

  bad = f.online;
  bad.adce_grid.sparsity = 1000;
  OnlineState failing(f.ce, f.hb, bad);
  CHECK_THROWS_AS(failing.initialize(observe(f, h, 3)), NumericalError);
  CHECK(failing.adce_calls() == 0);

  st.initialize(observe(f, h, 4));
  ReceivedPilot nan = observe(f, h, 5);
  nan[0](0, 0) = cplx(std::nan(""), 0.0);
  CHECK_THROWS_AS(st.step(nan), NumericalError);
  CHECK(same_bits(st.mc_cenet().params(), f.ce.params()));
  CHECK(st.history().empty());
}
