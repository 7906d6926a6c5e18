// Copyright 2026 The StemGNN-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stemgnn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "stemgnn/errors.hpp"
#include "stemgnn/eval.hpp"
#include "stemgnn/gradcheck.hpp"
#include "stemgnn/io.hpp"

namespace stemgnn::cli {

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string dataset;
  std::string adjacency;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> epochs;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value run configuration file");
  cmd->add_option("--set", f.overrides, "config override key=value (repeatable)");
  cmd->add_option("--dataset", f.dataset, "series CSV (header of node names)");
  cmd->add_option("--adjacency", f.adjacency, "adjacency CSV for the w/o-LC variant");
  cmd->add_option("--out", f.output_dir, "output directory");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--horizon", f.horizon, "rolling forecast horizon H");
  cmd->add_option("--epochs", f.epochs, "training epochs");
}

io::RunConfig resolve_config(const CommonFlags& f) {
  io::RunConfig c = f.config_path.empty() ? io::RunConfig{} : io::load_config(f.config_path);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    io::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.adjacency.empty()) c.adjacency = f.adjacency;
  if (!f.output_dir.empty()) c.output_dir = f.output_dir;
  if (f.seed) c.train.seed = *f.seed;
  if (f.horizon) c.horizon = *f.horizon;
  if (f.epochs) c.train.epochs = *f.epochs;
  return c;
}

struct Loaded {
  training::Dataset dataset;
  std::optional<Tensor> graph;
};

Loaded load_inputs(io::RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("no dataset given (--dataset or dataset = ... in the config)");
  Loaded l;
  l.dataset = io::load_csv(c.dataset);
  if (c.train.model.nodes == 0) c.train.model.nodes = l.dataset.nodes();
  if (c.train.model.nodes != l.dataset.nodes()) {
    throw DataError("config says " + std::to_string(c.train.model.nodes) + " nodes, dataset has " +
                    std::to_string(l.dataset.nodes()));
  }
  if (!c.adjacency.empty()) {
    l.graph = io::load_adjacency(c.adjacency);
    if (l.graph->dim(0) != l.dataset.nodes()) throw DataError("adjacency size does not match the dataset");
  }
  return l;
}

std::filesystem::path out_dir(const io::RunConfig& c) {
  std::filesystem::path p(c.output_dir.empty() ? "." : c.output_dir);
  std::filesystem::create_directories(p);
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << text;
}

model::ForwardOptions options_for(const io::RunConfig& c, const std::optional<Tensor>& graph) {
  model::ForwardOptions o;
  o.ablation = c.train.ablation;
  o.graph_override = graph ? &*graph : nullptr;
  return o;
}

int cmd_train(CommonFlags& f, const std::string& resume, std::ostream& out) {
  io::RunConfig c = resolve_config(f);
  Loaded in = load_inputs(c);
  const auto dir = out_dir(c);
  std::optional<training::Trainer> trainer;
  if (resume.empty()) {
    trainer.emplace(in.dataset, c.train, in.graph);
  } else {
    trainer.emplace(in.dataset, c.train, io::load_train_state(resume), in.graph);
  }
  while (!trainer->done()) {
    const training::EpochLog& e = trainer->run_epoch();
    out << "epoch " << e.epoch << " lr " << e.lr << " train_loss " << e.train_loss << " val_mae " << e.val_mae << "\n";
    io::save_train_state(trainer->state(), (dir / "train_state.txt").string());
  }
  io::save_checkpoint(trainer->state().best, (dir / "checkpoint.txt").string());
  io::save_train_state(trainer->state(), (dir / "train_state.txt").string());
  std::ostringstream log;
  training::write_log_csv(log, trainer->state().log);
  write_text(dir / "train_log.csv", log.str());
  io::save_config(c, (dir / "config.txt").string());
  out << "checkpoint: " << (dir / "checkpoint.txt").string() << " (best epoch " << trainer->state().best_epoch << ")\n";
  return kOk;
}

int cmd_eval(CommonFlags& f, const std::string& checkpoint, std::ostream& out) {
  io::RunConfig c = resolve_config(f);
  Loaded in = load_inputs(c);
  const model::NetworkParams net = io::load_checkpoint(checkpoint, c.train.model);
  const training::PreparedData data = training::prepare(in.dataset, c.train);
  const auto windows = eval::horizon_windows(data.splits.test, c.train.model.window, c.horizon);
  eval::ForecastReport rep = eval::evaluate(net, data, windows, c.horizon, options_for(c, in.graph), c.freeze_adjacency);
  rep.config_fingerprint = io::config_fingerprint(c);
  std::vector<eval::ForecastReport> all{rep};
  for (auto& b : eval::naive_baselines(in.dataset.values, windows, c.horizon)) {
    b.config_fingerprint = rep.config_fingerprint;
    all.push_back(std::move(b));
  }
  const auto dir = out_dir(c);
  std::ostringstream js, csv;
  eval::write_report_json(js, all);
  eval::write_predictions_csv(csv, rep, in.dataset.node_names);
  write_text(dir / "report.json", js.str());
  write_text(dir / "predictions.csv", csv.str());
  for (const auto& r : all) {
    out << r.model << ": MAE " << r.averaged.mae << " RMSE " << r.averaged.rmse << " MAPE " << r.averaged.mape << "%\n";
  }
  return kOk;
}

int cmd_forecast(CommonFlags& f, const std::string& checkpoint, std::ostream& out) {
  io::RunConfig c = resolve_config(f);
  Loaded in = load_inputs(c);
  const model::NetworkParams net = io::load_checkpoint(checkpoint, c.train.model);
  const training::PreparedData data = training::prepare(in.dataset, c.train);
  const std::size_t k = c.train.model.window, t = in.dataset.length();
  const training::Window last{t, k, 0};
  const Tensor pred = training::invert_normalization(
      data.norm, eval::rolling_forecast(net, training::window_input(data.normalized, last), c.horizon,
                                        options_for(c, in.graph), c.freeze_adjacency));
  std::ostringstream csv;
  csv << "node";
  for (std::size_t h = 1; h <= c.horizon; ++h) csv << ",t+" << h;
  csv << '\n';
  char buf[40];
  for (std::size_t i = 0; i < pred.dim(0); ++i) {
    csv << in.dataset.node_names[i];
    for (std::size_t h = 0; h < c.horizon; ++h) {
      std::snprintf(buf, sizeof buf, "%.17g", pred.at(i, h));
      csv << ',' << buf;
    }
    csv << '\n';
  }
  const auto dir = out_dir(c);
  write_text(dir / "forecast.csv", csv.str());
  out << csv.str();
  return kOk;
}

int cmd_ablate(CommonFlags& f, const std::vector<std::uint64_t>& seeds, std::ostream& out) {
  io::RunConfig c = resolve_config(f);
  Loaded in = load_inputs(c);
  if (!in.graph) throw ConfigError("ablate needs --adjacency for the w/o LC variant");
  const auto rows = eval::run_ablations(in.dataset, c.train, in.graph, seeds, c.horizon);
  std::ostringstream csv;
  eval::write_ablation_csv(csv, rows);
  write_text(out_dir(c) / "ablation.csv", csv.str());
  out << csv.str();
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& report_path, std::ostream& out) {
  model::ModelConfig cfg;
  cfg.nodes = 4;
  cfg.window = 8;
  cfg.channels = 4;
  cfg.basis = 8;
  cfg.attention_dim = 4;
  cfg.gru_hidden = 4;
  const double tolerance = 1e-4;
  const model::GradientAudit audit = model::gradient_audit(cfg, seed);
  std::ostringstream rep;
  model::write_audit_report(rep, audit, tolerance);
  if (!report_path.empty()) write_text(report_path, rep.str());
  out << rep.str();
  return audit.passed(tolerance) ? kOk : kNumeric;
}

int cmd_synth(const io::SynthOptions& o, const std::string& series, std::string adjacency, std::ostream& out) {
  if (adjacency.empty()) {
    const std::filesystem::path p(series);
    adjacency = (p.parent_path() / (p.stem().string() + "_adjacency.csv")).string();
  }
  io::write_synth(io::synthesize(o), series, adjacency);
  out << "series: " << series << "\nadjacency: " << adjacency << "\n";
  return kOk;
}

int cmd_export_graph(CommonFlags& f, const std::string& checkpoint, std::ostream& out) {
  io::RunConfig c = resolve_config(f);
  Loaded in = load_inputs(c);
  const model::NetworkParams net = io::load_checkpoint(checkpoint, c.train.model);
  const training::PreparedData data = training::prepare(in.dataset, c.train);
  const Tensor w = eval::export_adjacency(net, data.normalized, data.train_windows, options_for(c, in.graph));
  std::ostringstream csv;
  eval::write_matrix_csv(csv, w, in.dataset.node_names);
  write_text(out_dir(c) / "adjacency.csv", csv.str());
  out << csv.str();
  return kOk;
}

int cmd_export_spectral(CommonFlags& f, const std::string& checkpoint, std::size_t k, bool smallest,
                        std::ostream& out) {
  io::RunConfig c = resolve_config(f);
  Loaded in = load_inputs(c);
  const model::NetworkParams net = io::load_checkpoint(checkpoint, c.train.model);
  const training::PreparedData data = training::prepare(in.dataset, c.train);
  const Tensor w = eval::export_adjacency(net, data.normalized, data.train_windows, options_for(c, in.graph));
  const spectral::SpectralBasis basis = spectral::jacobi_eigh(spectral::normalized_laplacian(w));
  const eval::SpectralComponents comp = eval::export_spectral_components(
      net, basis, data.normalized, k, smallest ? eval::ComponentOrder::kSmallest : eval::ComponentOrder::kLargest);
  std::ostringstream csv;
  eval::write_components_csv(csv, comp);
  write_text(out_dir(c) / "spectral_components.csv", csv.str());
  out << "wrote " << comp.eigen_index.size() << " components to " << (out_dir(c) / "spectral_components.csv").string()
      << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"StemGNN multivariate time-series forecasting", "stemgnn"};
  app.require_subcommand(1);

  CommonFlags common;
  std::string checkpoint, resume, report_path, synth_out, synth_adj;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t grad_seed = 7;
  std::size_t k = 4;
  bool smallest = false;
  io::SynthOptions synth;

  auto* train = app.add_subcommand("train", "train a model; writes checkpoint, state and log CSV");
  add_common(train, common);
  train->add_option("--resume", resume, "training-state file to continue from");

  auto* ev = app.add_subcommand("eval", "rolling evaluation on the test range; writes report JSON and CSV");
  add_common(ev, common);
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  auto* fc = app.add_subcommand("forecast", "forecast H steps past the end of the series");
  add_common(fc, common);
  fc->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  auto* ab = app.add_subcommand("ablate", "train and compare the full model and six ablations");
  add_common(ab, common);
  ab->add_option("--seeds", seeds, "seeds shared by every variant")->delimiter(',');

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit of a tiny model");
  gc->add_option("--seed", grad_seed, "audit seed");
  gc->add_option("--report", report_path, "also write the report to this file");

  auto* sy = app.add_subcommand("synth", "generate a synthetic dataset and its adjacency");
  sy->add_option("--kind", synth.kind, "graph-diffusion-sines or covid-like");
  sy->add_option("--nodes", synth.nodes, "number of nodes N");
  sy->add_option("--length", synth.length, "number of timestamps T");
  sy->add_option("--seed", synth.seed, "generator seed");
  sy->add_option("--sinusoids", synth.sinusoids, "shared sinusoids (1 or 2)");
  sy->add_option("--noise", synth.noise_fraction, "noise sigma as a fraction of the amplitude");
  sy->add_option("--out", synth_out, "series CSV path")->required();
  sy->add_option("--adjacency-out", synth_adj, "adjacency CSV path");

  auto* eg = app.add_subcommand("export-graph", "mean learned adjacency over the training windows");
  add_common(eg, common);
  eg->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  auto* es = app.add_subcommand("export-spectral", "GFT components and their Spe-Seq outputs");
  add_common(es, common);
  es->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  es->add_option("--k", k, "number of components");
  es->add_flag("--smallest", smallest, "use the smallest eigenvalues instead of the largest");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  try {
    if (*train) return cmd_train(common, resume, out);
    if (*ev) return cmd_eval(common, checkpoint, out);
    if (*fc) return cmd_forecast(common, checkpoint, out);
    if (*ab) return cmd_ablate(common, seeds, out);
    if (*gc) return cmd_gradcheck(grad_seed, report_path, out);
    if (*sy) return cmd_synth(synth, synth_out, synth_adj, out);
    if (*eg) return cmd_export_graph(common, checkpoint, out);
    if (*es) return cmd_export_spectral(common, checkpoint, k, smallest, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  err << app.help();
  return kUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace stemgnn::cli
