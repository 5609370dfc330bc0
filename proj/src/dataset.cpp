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

#include "wbhb/dataset.hpp"

#include "binary_io.hpp"
#include "wbhb/config.hpp"
#include "wbhb/errors.hpp"
#include "wbhb/random.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>

namespace wbhb {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kNoSubcarrier = 0xffffffffU;

void put_vector(std::ostream& os, const Eigen::VectorXf& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) io::put_f32(os, v(i));
}

Eigen::VectorXf get_vector(std::istream& is, Eigen::Index n) {
  Eigen::VectorXf v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = io::get_f32(is);
  return v;
}

bool same_bits(const Eigen::MatrixXf& a, const Eigen::MatrixXf& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index k = 0; k < a.size(); ++k)
    if (std::bit_cast<std::uint32_t>(a.data()[k]) != std::bit_cast<std::uint32_t>(b.data()[k]))
      return false;
  return true;
}

std::string file_name(NetKind kind, int subcarrier) {
  std::string s = net_kind_name(kind);
  if (kind == NetKind::sc_cenet) s += "_" + std::to_string(subcarrier);
  return s + ".wbds";
}

json generation_snapshot(const GenerationConfig& g) {
  json grid = json::array();
  for (const auto& p : g.grid)
    grid.push_back({{"snr_db", snr_to_json(p.snr_db)},
                    {"snr_h_db", snr_to_json(p.snr_h_db)},
                    {"snr_pilot_db", snr_to_json(p.snr_pilot_db)}});
  return json{{"system", g.sys},
              {"pilot", g.pilot},
              {"clusters", g.clusters},
              {"rays_per_cluster", g.rays_per_cluster},
              {"scenario", g.scenario},
              {"n_scenarios", g.n_scenarios},
              {"g_per_scenario", g.g_per_scenario},
              {"grid", grid},
              {"seed", g.seed},
              {"noise_var", g.noise_var},
              {"clean_channel_labels", g.clean_channel_labels},
              {"hybrid", g.hybrid}};
}

Dataset empty_dataset(NetKind kind, int subcarrier, const SystemConfig& cfg, Shape3 shape,
                      int label_length, std::size_t count) {
  Dataset d;
  d.kind = kind;
  d.subcarrier = subcarrier;
  d.cfg = cfg;
  d.feature_shape = shape;
  d.label_length = label_length;
  d.features.resize(shape.size(), static_cast<Eigen::Index>(count));
  d.labels.resize(label_length, static_cast<Eigen::Index>(count));
  return d;
}

struct Record {
  RVector pilot;                 // stacked pilot features
  std::vector<RVector> pilot_sc; // per-subcarrier pilot features
  RVector channel;               // corrupted channel features
  RVector z;
  RVector z_h;
};

}  // namespace

const char* net_kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::mc_hbnet: return "mc_hbnet";
    case NetKind::mc_cenet: return "mc_cenet";
    case NetKind::hbnet: return "hbnet";
    case NetKind::sc_cenet: return "sc_cenet";
  }
  return "unknown";
}

// Entries whose spread is at the level of float rounding (for instance the
// aligned first analog phase) are treated as constant.
constexpr double kMinStd = 1e-6;

void Dataset::fit_statistics() {
  const int c = feature_shape.c;
  feature_mean = Eigen::VectorXf::Zero(c);
  feature_std = Eigen::VectorXf::Ones(c);
  label_mean = Eigen::VectorXf::Zero(label_length);
  label_std = Eigen::VectorXf::Ones(label_length);
  if (size() == 0) return;
  const double per_channel = static_cast<double>(size()) * feature_shape.h * feature_shape.w;
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    double s2 = 0.0;
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      for (Eigen::Index i = ch; i < features.rows(); i += c) {
        const double v = features(i, j);
        s += v;
        s2 += v * v;
      }
    const double mean = s / per_channel;
    const double sd = std::sqrt(std::max(0.0, s2 / per_channel - mean * mean));
    feature_mean(ch) = static_cast<float>(mean);
    feature_std(ch) = sd > kMinStd ? static_cast<float>(sd) : 1.0f;
  }
  const Eigen::MatrixXd y = labels.cast<double>();
  const Eigen::VectorXd mean = y.rowwise().mean();
  const Eigen::VectorXd sd = ((y.colwise() - mean).array().square().rowwise().mean()).sqrt();
  for (int i = 0; i < label_length; ++i) {
    label_mean(i) = static_cast<float>(mean(i));
    label_std(i) = sd(i) > kMinStd ? static_cast<float>(sd(i)) : 1.0f;
  }
}

Normalization Dataset::normalization() const {
  Normalization n;
  n.in_mean = feature_mean.cast<double>();
  n.in_std = feature_std.cast<double>();
  n.out_mean = label_mean.cast<double>();
  n.out_std = label_std.cast<double>();
  return n;
}

RMatrix Dataset::normalized_features() const {
  return normalization().normalize_input(features.cast<double>());
}

RMatrix Dataset::normalized_labels() const {
  return normalization().normalize_output(labels.cast<double>());
}

bool identical(const Dataset& a, const Dataset& b) {
  const auto& x = a.cfg;
  const auto& y = b.cfg;
  const bool cfg_same = x.n_tx == y.n_tx && x.n_rx == y.n_rx && x.n_rf == y.n_rf &&
                        x.n_streams == y.n_streams && x.n_subcarriers == y.n_subcarriers &&
                        x.cp_len == y.cp_len && x.unit_gain == y.unit_gain &&
                        std::bit_cast<std::uint64_t>(x.carrier_hz) ==
                            std::bit_cast<std::uint64_t>(y.carrier_hz) &&
                        std::bit_cast<std::uint64_t>(x.bandwidth_hz) ==
                            std::bit_cast<std::uint64_t>(y.bandwidth_hz) &&
                        std::bit_cast<std::uint64_t>(x.spacing_wavelengths) ==
                            std::bit_cast<std::uint64_t>(y.spacing_wavelengths) &&
                        std::bit_cast<std::uint64_t>(x.symbol_period_s) ==
                            std::bit_cast<std::uint64_t>(y.symbol_period_s);
  return cfg_same && a.kind == b.kind && a.subcarrier == b.subcarrier &&
         a.feature_shape == b.feature_shape && a.label_length == b.label_length &&
         same_bits(a.features, b.features) && same_bits(a.labels, b.labels) &&
         same_bits(a.feature_mean, b.feature_mean) && same_bits(a.feature_std, b.feature_std) &&
         same_bits(a.label_mean, b.label_mean) && same_bits(a.label_std, b.label_std);
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  const auto c = static_cast<Eigen::Index>(d.feature_shape.c);
  if (d.features.rows() != d.feature_shape.size() || d.labels.rows() != d.label_length ||
      d.labels.cols() != d.features.cols() || d.feature_mean.size() != c ||
      d.feature_std.size() != c || d.label_mean.size() != d.label_length ||
      d.label_std.size() != d.label_length)
    throw std::invalid_argument("write_dataset: inconsistent dataset dimensions");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_dataset: cannot open " + path.string());
  io::put_magic(os, "WBDS");
  io::put_u32(os, kDatasetVersion);
  io::put_u32(os, static_cast<std::uint32_t>(d.kind));
  io::put_u32(os, d.subcarrier < 0 ? kNoSubcarrier : static_cast<std::uint32_t>(d.subcarrier));
  for (int v : {d.cfg.n_tx, d.cfg.n_rx, d.cfg.n_rf, d.cfg.n_streams, d.cfg.n_subcarriers,
                d.cfg.cp_len, static_cast<int>(d.cfg.unit_gain)})
    io::put_u32(os, static_cast<std::uint32_t>(v));
  for (double v : {d.cfg.carrier_hz, d.cfg.bandwidth_hz, d.cfg.spacing_wavelengths,
                   d.cfg.symbol_period_s})
    io::put_f64(os, v);
  io::put_u64(os, d.size());
  io::put_u32(os, static_cast<std::uint32_t>(d.feature_shape.h));
  io::put_u32(os, static_cast<std::uint32_t>(d.feature_shape.w));
  io::put_u32(os, static_cast<std::uint32_t>(d.feature_shape.c));
  io::put_u32(os, static_cast<std::uint32_t>(d.label_length));
  put_vector(os, d.feature_mean);
  put_vector(os, d.feature_std);
  put_vector(os, d.label_mean);
  put_vector(os, d.label_std);
  for (Eigen::Index t = 0; t < d.features.cols(); ++t) {
    put_vector(os, d.features.col(t));
    put_vector(os, d.labels.col(t));
  }
  if (!os) throw std::runtime_error("write_dataset: write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_dataset: cannot open " + path.string());
  io::expect_magic(is, "WBDS", "read_dataset");
  if (const auto v = io::get_u32(is); v != kDatasetVersion)
    throw FormatError("read_dataset: unsupported version " + std::to_string(v));
  Dataset d;
  const auto kind = io::get_u32(is);
  if (kind < 1 || kind > 4) throw FormatError("read_dataset: unknown network kind");
  d.kind = static_cast<NetKind>(kind);
  const auto sc = io::get_u32(is);
  d.subcarrier = sc == kNoSubcarrier ? -1 : static_cast<int>(sc);
  int* ints[] = {&d.cfg.n_tx, &d.cfg.n_rx, &d.cfg.n_rf, &d.cfg.n_streams, &d.cfg.n_subcarriers,
                 &d.cfg.cp_len};
  for (int* p : ints) *p = static_cast<int>(io::get_u32(is));
  d.cfg.unit_gain = io::get_u32(is) != 0;
  d.cfg.carrier_hz = io::get_f64(is);
  d.cfg.bandwidth_hz = io::get_f64(is);
  d.cfg.spacing_wavelengths = io::get_f64(is);
  d.cfg.symbol_period_s = io::get_f64(is);
  const auto count = io::get_u64(is);
  d.feature_shape.h = static_cast<int>(io::get_u32(is));
  d.feature_shape.w = static_cast<int>(io::get_u32(is));
  d.feature_shape.c = static_cast<int>(io::get_u32(is));
  d.label_length = static_cast<int>(io::get_u32(is));
  // Guard the allocation against a corrupt header before trusting it.
  const auto start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(is.tellg() - start);
  is.seekg(start);
  const std::uint64_t per_record =
      4ULL * (static_cast<std::uint64_t>(d.feature_shape.size()) + d.label_length);
  const std::uint64_t stats = 4ULL * (2ULL * d.feature_shape.c + 2ULL * d.label_length);
  if (d.feature_shape.h <= 0 || d.feature_shape.w <= 0 || d.feature_shape.c <= 0 ||
      d.label_length <= 0 || remaining != stats + count * per_record)
    throw FormatError("read_dataset: record count does not match the file size");
  d.feature_mean = get_vector(is, d.feature_shape.c);
  d.feature_std = get_vector(is, d.feature_shape.c);
  d.label_mean = get_vector(is, d.label_length);
  d.label_std = get_vector(is, d.label_length);
  d.features.resize(d.feature_shape.size(), static_cast<Eigen::Index>(count));
  d.labels.resize(d.label_length, static_cast<Eigen::Index>(count));
  for (Eigen::Index t = 0; t < d.features.cols(); ++t) {
    d.features.col(t) = get_vector(is, d.features.rows());
    d.labels.col(t) = get_vector(is, d.labels.rows());
  }
  return d;
}

std::vector<GridPoint> zip_grids(const std::vector<double>& snr, const std::vector<double>& snr_h,
                                 const std::vector<double>& snr_pilot) {
  std::size_t n = 1;
  for (const auto* g : {&snr, &snr_h, &snr_pilot}) {
    if (g->empty()) throw ConfigError("zip_grids: empty SNR grid");
    if (g->size() > 1) {
      if (n > 1 && g->size() != n)
        throw ConfigError("zip_grids: grids must have equal lengths or a single entry");
      n = g->size();
    }
  }
  auto at = [](const std::vector<double>& g, std::size_t k) { return g.size() == 1 ? g[0] : g[k]; };
  std::vector<GridPoint> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = {at(snr, k), at(snr_h, k), at(snr_pilot, k)};
  return out;
}

std::vector<GridPoint> default_grid() {
  return zip_grids({-10.0, 0.0, 10.0}, {15.0, 20.0, 25.0}, {20.0, 30.0, 40.0});
}

void GenerationConfig::validate() const {
  sys.validate();
  pilot.validate(sys);
  if (n_scenarios < 1 || g_per_scenario < 1)
    throw ConfigError("generation: N and G must be at least 1");
  if (grid.empty()) throw ConfigError("generation: empty SNR grid");
  if (clusters < 1 || rays_per_cluster < 1)
    throw ConfigError("generation: clusters and rays per cluster must be at least 1");
  if (!(noise_var > 0.0)) throw ConfigError("generation: noise_var must be positive");
}

ChannelScenario dataset_scenario(const GenerationConfig& g, int n) {
  return random_scenario(g.sys, g.clusters, g.rays_per_cluster,
                         derive_seed(g.seed, {0x5ce7, static_cast<std::uint64_t>(n)}), g.scenario);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

GeneratedData generate_datasets(const GenerationConfig& g,
                                const std::function<void(const std::string&)>& log) {
  g.validate();
  const SystemConfig& sys = g.sys;
  const TrainingBeams beams = training_beamformers(sys, g.pilot);
  const std::size_t n_grid = g.grid.size();

  std::vector<ChannelTensor> channels(g.n_scenarios);
  parallel_for(channels.size(), g.threads, [&](std::size_t n) {
    channels[n] = frequency_channel(sys, dataset_scenario(g, static_cast<int>(n)));
  });

  const std::size_t pairs = static_cast<std::size_t>(g.n_scenarios) * g.g_per_scenario;
  std::vector<std::optional<Record>> records(pairs * n_grid);
  std::vector<std::string> failures(records.size());
  parallel_for(pairs, g.threads, [&](std::size_t p) {
    const auto n = static_cast<std::uint64_t>(p / g.g_per_scenario);
    const auto gi = static_cast<std::uint64_t>(p % g.g_per_scenario);
    HybridOptions hopt = g.hybrid;
    // A shared start per scenario keeps labels of nearby channels in the
    // same basin of the factorization.
    hopt.altmin.seed = derive_seed(g.seed, {0xa170, n});
    for (std::size_t k = 0; k < n_grid; ++k) {
      const GridPoint& pt = g.grid[k];
      const std::uint64_t rs = derive_seed(g.seed, {n, gi, k});
      try {
        const ChannelTensor hc = corrupt_channel(channels[n], pt.snr_h_db, derive_seed(rs, {1}));
        PilotConfig pc = g.pilot;
        pc.snr_pilot_db = pt.snr_pilot_db;
        const ReceivedPilot y = receive_pilots(hc, beams, pc, derive_seed(rs, {2}));
        HybridDesign d = design_hybrid(hc, sys, std::pow(10.0, pt.snr_db / 10.0), g.noise_var, hopt);
        align_analog_phases(d.beams);
        Record r;
        r.pilot = featurize_pilot(y).data;
        for (auto& f : featurize_pilot_per_subcarrier(y)) r.pilot_sc.push_back(std::move(f.data));
        r.channel = featurize_channel(hc).data;
        r.z = encode_beamformer(d.beams);
        r.z_h = encode_channel(g.clean_channel_labels ? channels[n] : hc);
        if (!r.z.allFinite() || !r.z_h.allFinite() || !r.pilot.allFinite())
          throw NumericalError("non-finite record");
        records[p * n_grid + k] = std::move(r);
      } catch (const DegenerateError& e) {
        failures[p * n_grid + k] = e.what();
      } catch (const NumericalError& e) {
        failures[p * n_grid + k] = e.what();
      }
    }
  });

  GeneratedData out;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i]) {
      ++kept;
      continue;
    }
    const std::size_t p = i / n_grid;
    SkippedRecord s{static_cast<int>(p / g.g_per_scenario), static_cast<int>(p % g.g_per_scenario),
                    static_cast<int>(i % n_grid), failures[i]};
    if (log)
      log("skipped record n=" + std::to_string(s.scenario) + " g=" + std::to_string(s.realization) +
          " grid=" + std::to_string(s.grid_index) + ": " + s.reason);
    out.skipped.push_back(std::move(s));
  }

  const Shape3 pilot_shape{sys.n_subcarriers * g.pilot.m_rx, g.pilot.m_tx, 3};
  const Shape3 sc_shape{g.pilot.m_rx, g.pilot.m_tx, 3};
  const Shape3 channel_shape{sys.n_subcarriers * sys.n_rx, sys.n_tx, 3};
  const int zl = beamformer_label_length(sys);
  const int hl = channel_label_length(sys);
  const int hl_sc = hl / sys.n_subcarriers;
  out.mc_hbnet = empty_dataset(NetKind::mc_hbnet, -1, sys, pilot_shape, zl, kept);
  out.mc_cenet = empty_dataset(NetKind::mc_cenet, -1, sys, pilot_shape, hl, kept);
  out.hbnet = empty_dataset(NetKind::hbnet, -1, sys, channel_shape, zl, kept);
  for (int m = 0; m < sys.n_subcarriers; ++m)
    out.sc_cenet.push_back(empty_dataset(NetKind::sc_cenet, m, sys, sc_shape, hl_sc, kept));

  Eigen::Index t = 0;
  for (const auto& r : records) {
    if (!r) continue;
    if (r->z.size() != zl || r->z_h.size() != hl)
      throw std::logic_error("generate_datasets: label length does not match the layout");
    out.mc_hbnet.features.col(t) = r->pilot.cast<float>();
    out.mc_hbnet.labels.col(t) = r->z.cast<float>();
    out.mc_cenet.features.col(t) = r->pilot.cast<float>();
    out.mc_cenet.labels.col(t) = r->z_h.cast<float>();
    out.hbnet.features.col(t) = r->channel.cast<float>();
    out.hbnet.labels.col(t) = r->z.cast<float>();
    for (int m = 0; m < sys.n_subcarriers; ++m) {
      out.sc_cenet[m].features.col(t) = r->pilot_sc[m].cast<float>();
      out.sc_cenet[m].labels.col(t) = r->z_h.segment(m * hl_sc, hl_sc).cast<float>();
    }
    ++t;
  }
  out.mc_hbnet.fit_statistics();
  out.mc_cenet.fit_statistics();
  out.hbnet.fit_statistics();
  for (auto& d : out.sc_cenet) d.fit_statistics();
  return out;
}

void write_generated(const GeneratedData& data, const GenerationConfig& g,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const json snapshot = generation_snapshot(g);
  json skipped = json::array();
  for (const auto& s : data.skipped)
    skipped.push_back({{"scenario", s.scenario},
                       {"realization", s.realization},
                       {"grid_index", s.grid_index},
                       {"reason", s.reason}});
  json files = json::array();
  auto emit = [&](const Dataset& d) {
    const std::string name = file_name(d.kind, d.subcarrier);
    write_dataset(d, dir / name);
    json side{{"file", name},
              {"kind", net_kind_name(d.kind)},
              {"records", d.size()},
              {"feature_shape", {d.feature_shape.h, d.feature_shape.w, d.feature_shape.c}},
              {"label_length", d.label_length},
              {"generation", snapshot},
              {"config_hash", config_hash(snapshot)}};
    if (d.subcarrier >= 0) side["subcarrier"] = d.subcarrier;
    std::ofstream(dir / (name + ".json")) << side.dump(2) << '\n';
    files.push_back(name);
  };
  emit(data.mc_hbnet);
  emit(data.mc_cenet);
  emit(data.hbnet);
  for (const auto& d : data.sc_cenet) emit(d);
  const json manifest{{"files", files},
                      {"records", data.mc_hbnet.size()},
                      {"requested_records", g.record_count()},
                      {"skipped", skipped},
                      {"generation", snapshot},
                      {"config_hash", config_hash(snapshot)}};
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << '\n';
  if (!os) throw std::runtime_error("write_generated: cannot write manifest in " + dir.string());
}

GeneratedData read_generated(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw std::runtime_error("read_generated: no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(is);
  } catch (const json::exception& e) {
    throw FormatError(std::string("read_generated: bad manifest: ") + e.what());
  }
  GeneratedData out;
  for (const auto& f : manifest.at("files")) {
    Dataset d = read_dataset(dir / f.get<std::string>());
    switch (d.kind) {
      case NetKind::mc_hbnet: out.mc_hbnet = std::move(d); break;
      case NetKind::mc_cenet: out.mc_cenet = std::move(d); break;
      case NetKind::hbnet: out.hbnet = std::move(d); break;
      case NetKind::sc_cenet: out.sc_cenet.push_back(std::move(d)); break;
    }
  }
  for (const auto& s : manifest.value("skipped", json::array()))
    out.skipped.push_back({s.at("scenario"), s.at("realization"), s.at("grid_index"), s.at("reason")});
  return out;
}

}  // namespace wbhb
