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

// wbhb command-line front end: generate, train, evaluate, online.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include "CLI11.hpp"

#include "wbhb/errors.hpp"
#include "wbhb/experiments.hpp"
#include "wbhb/random.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wbhb;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::string preset = "paper";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration overlaid on the preset");
  cmd->add_option("--preset", c.preset, "Base configuration")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", c.seed, "Seed for this command");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = hardware)");
}

// Explicit --config wins, then the config.json stored next to the inputs,
// then the preset.
ExperimentConfig resolve_config(const Common& c, const fs::path& inputs) {
  ExperimentConfig cfg;
  if (!c.config.empty())
    cfg = load_experiment_config(c.config, c.preset);
  else if (!inputs.empty() && fs::exists(inputs / "config.json"))
    cfg = load_experiment_config(inputs / "config.json", c.preset);
  else
    cfg = ExperimentConfig::named(c.preset);
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

std::string hash_of(const ExperimentConfig& cfg) { return config_hash(json(cfg)); }

void write_config(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "config.json");
  os << json(cfg).dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + (dir / "config.json").string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> g;
  for (const auto& item : split_list(s)) {
    if (item == "inf") {
      g.push_back(kNoNoise);
      continue;
    }
    try {
      std::size_t used = 0;
      g.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value \"" + item + "\"");
    }
  }
  return g;
}

std::vector<double> default_grid(Sweep s, const ExperimentConfig& cfg) {
  switch (s) {
    case Sweep::snr: return {-10.0, -5.0, 0.0, 5.0, 10.0};
    case Sweep::snr_pilot_test: return {0.0, 10.0, 20.0, 30.0};
    case Sweep::snr_pilot_symbol: return {10.0, 20.0, 30.0, kNoNoise};
    case Sweep::pilots_mt:
      return {std::max(1.0, cfg.sys.n_tx / 4.0), cfg.sys.n_tx / 2.0, static_cast<double>(cfg.sys.n_tx)};
    case Sweep::angle_mismatch: return {0.0, 5.0, 10.0, 15.0, 20.0};
    case Sweep::cluster_mismatch: {
      std::vector<double> g;
      for (int d = -4; d <= 4; d += 2)
        if (cfg.clusters + d >= 1) g.push_back(cfg.clusters + d);
      return g;
    }
  }
  return {};
}

Framework parse_framework(const std::string& s) {
  if (s == "F1") return Framework::f1;
  if (s == "F2") return Framework::f2;
  if (s == "F3") return Framework::f3;
  throw ConfigError("unknown framework \"" + s + "\" (expected F1, F2 or F3)");
}

// ---- generate ---------------------------------------------------------------------

int run_generate(const Common& c) {
  ExperimentConfig cfg = resolve_config(c, {});
  if (c.seed) cfg.seed = *c.seed;
  if (c.out.empty()) throw ConfigError("generate: --out is required");
  const GenerationConfig g = cfg.generation();
  g.validate();
  const GeneratedData data = generate_datasets(g, [](const std::string& msg) { std::cerr << msg << '\n'; });
  write_generated(data, g, c.out);
  write_config(cfg, c.out);
  std::cout << "wrote " << data.mc_hbnet.size() << " records per file to " << c.out << '\n';
  return 0;
}

// ---- train ------------------------------------------------------------------------

int run_train(const Common& c, const std::string& data_path, const std::string& frameworks,
              const std::string& resume) {
  if (c.out.empty()) throw ConfigError("train: --out is required");
  if (data_path.empty()) throw ConfigError("train: --data is required");
  const fs::path data_dir = fs::is_directory(data_path) ? fs::path(data_path) : fs::path(data_path).parent_path();
  ExperimentConfig cfg = resolve_config(c, data_dir);
  if (c.seed) cfg.train.rng_seed = *c.seed;

  const fs::path out = c.out;
  fs::create_directories(out);
  std::ofstream loss(out / "loss.csv");
  loss << "# config_hash " << hash_of(cfg) << '\n' << "net,epoch,train_loss,val_loss\n";
  loss.precision(10);
  const TrainLog log = [&](const std::string& net, int epoch, double tl, double vl) {
    loss << net << ',' << epoch << ',' << tl << ',' << vl << '\n';
  };

  Models prior;
  if (!resume.empty()) prior = load_models(resume);

  Models m;
  if (!fs::is_directory(data_path)) {
    // A single WBDS file trains one network.
    const Dataset d = read_dataset(data_path);
    std::optional<NeuralNet> start;
    switch (d.kind) {
      case NetKind::mc_hbnet: start = prior.mc_hbnet; break;
      case NetKind::mc_cenet: start = prior.mc_cenet; break;
      case NetKind::hbnet: start = prior.hbnet; break;
      case NetKind::sc_cenet:
        if (d.subcarrier >= 0 && static_cast<std::size_t>(d.subcarrier) < prior.sc_cenet.size())
          start = prior.sc_cenet[d.subcarrier];
        break;
    }
    NeuralNet net = train_network(d, cfg, start, log);
    const std::string name = std::string(net_kind_name(d.kind)) +
                             (d.kind == NetKind::sc_cenet ? "_" + std::to_string(d.subcarrier) : "") + ".wbnn";
    save_checkpoint(net, out / name);
  } else {
    std::vector<Framework> fw;
    for (const auto& f : split_list(frameworks)) fw.push_back(parse_framework(f));
    if (fw.empty()) throw ConfigError("train: no frameworks requested");
    const GeneratedData data = read_generated(data_path);
    bool f1 = false, f2 = false, f3 = false;
    for (auto f : fw) {
      f1 = f1 || f == Framework::f1;
      f2 = f2 || f == Framework::f2;
      f3 = f3 || f == Framework::f3;
    }
    if (f1) m.mc_hbnet = train_network(data.mc_hbnet, cfg, prior.mc_hbnet, log);
    if (f2) m.mc_cenet = train_network(data.mc_cenet, cfg, prior.mc_cenet, log);
    if (f2 || f3) m.hbnet = train_network(data.hbnet, cfg, prior.hbnet, log);
    if (f3)
      for (std::size_t k = 0; k < data.sc_cenet.size(); ++k)
        m.sc_cenet.push_back(train_network(
            data.sc_cenet[k], cfg, k < prior.sc_cenet.size() ? std::optional(prior.sc_cenet[k]) : std::nullopt,
            log));
    save_models(m, out);
  }
  write_config(cfg, out);
  if (!loss) throw std::runtime_error("cannot write " + (out / "loss.csv").string());
  std::cout << "wrote models to " << out.string() << '\n';
  return 0;
}

// ---- evaluate ---------------------------------------------------------------------

int run_evaluate(const Common& c, const std::string& models_dir, const std::string& sweep_name_arg,
                 const std::string& grid_arg, std::optional<int> trials, const std::string& methods_arg) {
  ExperimentConfig cfg = resolve_config(c, models_dir);
  const Sweep sweep = parse_sweep(sweep_name_arg);
  const std::vector<double> grid = grid_arg.empty() ? default_grid(sweep, cfg) : parse_grid(grid_arg);
  const Models models = models_dir.empty() ? Models{} : load_models(models_dir);

  std::vector<std::string> methods;
  if (!methods_arg.empty()) {
    methods = split_list(methods_arg);
  } else {
    // Learned frameworks are tied to their training pilot shape, so the
    // pilot-count sweep defaults to the model-free methods.
    for (const auto& m : all_methods()) {
      const bool learned = m[0] == 'F' && m != "FD";
      if (learned && (sweep == Sweep::pilots_mt || !models.supports(parse_framework(m)))) continue;
      methods.push_back(m);
    }
  }
  const Evaluation ev = evaluate(models, cfg, sweep, grid, trials.value_or(cfg.trials), methods,
                                 c.seed.value_or(derive_seed(cfg.seed, {0xe7a1})));
  if (c.out.empty()) {
    write_results_csv(std::cout, ev.rows, hash_of(cfg));
  } else {
    if (fs::path(c.out).has_parent_path()) fs::create_directories(fs::path(c.out).parent_path());
    std::ofstream os(c.out);
    write_results_csv(os, ev.rows, hash_of(cfg));
    if (!os) throw std::runtime_error("cannot write " + c.out);
  }
  return 0;
}

// ---- online -----------------------------------------------------------------------

int run_online(const Common& c, const std::string& models_dir, const std::string& zeta_arg,
               std::optional<int> steps, std::optional<double> drift) {
  if (models_dir.empty()) throw ConfigError("online: --models is required");
  ExperimentConfig cfg = resolve_config(c, models_dir);
  if (steps) cfg.online.steps = *steps;
  if (drift) cfg.online.drift_max_deg = *drift;
  if (!zeta_arg.empty()) {
    const auto z = parse_grid(zeta_arg);
    if (z.size() != 1) throw ConfigError("online: --zeta takes one value");
    cfg.online.zeta = z[0];
  }
  cfg.validate();
  const Models models = load_models(models_dir);
  if (!models.mc_cenet || !models.hbnet) throw ConfigError("online: needs mc_cenet.wbnn and hbnet.wbnn");
  const DriftRun run = run_drift(*models.mc_cenet, *models.hbnet, cfg, cfg.online.zeta,
                                 c.seed.value_or(derive_seed(cfg.seed, {0x0d1f})));
  if (c.out.empty()) {
    write_online_csv(std::cout, run.log, cfg.online.zeta, hash_of(cfg));
  } else {
    std::ofstream os(c.out);
    write_online_csv(os, run.log, cfg.online.zeta, hash_of(cfg));
    if (!os) throw std::runtime_error("cannot write " + c.out);
  }
  std::cerr << "updates " << run.updates << ", ADCE calls " << run.adce_calls << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wideband mm-Wave hybrid beamforming toolkit"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, online_c;

  auto* gen = app.add_subcommand("generate", "Generate the training datasets");
  add_common(gen, gen_c);
  gen->add_option("--out", gen_c.out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train networks on generated datasets");
  add_common(tr, train_c);
  std::string data_path, frameworks = "F1,F2,F3", resume;
  tr->add_option("--data", data_path, "Dataset directory or a single .wbds file")->required();
  tr->add_option("--out", train_c.out, "Model directory")->required();
  tr->add_option("--frameworks", frameworks, "Comma-separated subset of F1,F2,F3");
  tr->add_option("--resume", resume, "Model directory to continue from");

  auto* ev = app.add_subcommand("evaluate", "Monte Carlo evaluation along one sweep axis");
  add_common(ev, eval_c);
  std::string eval_models, sweep = "snr", grid, methods;
  std::optional<int> trials;
  ev->add_option("--models", eval_models, "Model directory");
  ev->add_option("--sweep", sweep, "snr, snr_pilot_test, snr_pilot_symbol, pilots_mt, angle_mismatch, cluster_mismatch");
  ev->add_option("--grid", grid, "Comma-separated sweep values (inf allowed)");
  ev->add_option("--trials", trials, "Trials per grid point");
  ev->add_option("--methods", methods, "Comma-separated subset of F1,F2,F3,LS,LMMSE,ADCE,PE,MO,FD");
  ev->add_option("--out", eval_c.out, "CSV path (stdout if omitted)");

  auto* on = app.add_subcommand("online", "Threshold-triggered online refresh under angle drift");
  add_common(on, online_c);
  std::string online_models, zeta;
  std::optional<int> steps;
  std::optional<double> drift;
  on->add_option("--models", online_models, "Model directory with mc_cenet and hbnet")->required();
  on->add_option("--zeta", zeta, "Update threshold (inf disables updates)");
  on->add_option("--steps", steps, "Deployment steps");
  on->add_option("--drift", drift, "Final angle spread in degrees");
  on->add_option("--out", online_c.out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return run_generate(gen_c);
    if (*tr) return run_train(train_c, data_path, frameworks, resume);
    if (*ev) return run_evaluate(eval_c, eval_models, sweep, grid, trials, methods);
    if (*on) return run_online(online_c, online_models, zeta, steps, drift);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DegenerateError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IllPosedError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
