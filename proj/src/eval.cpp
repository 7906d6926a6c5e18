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

#include "stemgnn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "stemgnn/errors.hpp"

namespace stemgnn::eval {

using training::Window;

Tensor rolling_forecast(const Forecaster& step, const Tensor& window, std::size_t horizon) {
  require_rank(window, 2, "rolling_forecast");
  if (horizon == 0) throw ConfigError("rolling_forecast: horizon must be positive");
  const std::size_t n = window.dim(0), k = window.dim(1);
  Tensor current = window;
  Tensor out({n, horizon});
  for (std::size_t h = 0; h < horizon; ++h) {
    const Tensor next = step(current);
    if (next.rank() != 2 || next.dim(0) != n || next.dim(1) == 0) {
      throw DimensionError("rolling_forecast: step returned " + shape_string(next.shape()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.at(i, h) = next.at(i, 0);
      for (std::size_t j = 0; j + 1 < k; ++j) current.at(i, j) = current.at(i, j + 1);
      current.at(i, k - 1) = next.at(i, 0);
    }
  }
  return out;
}

Tensor rolling_forecast(const model::NetworkParams& net, const Tensor& window, std::size_t horizon,
                        const model::ForwardOptions& options, bool freeze_adjacency) {
  model::ForwardOptions opts = options;
  Tensor frozen_w;
  spectral::SpectralBasis frozen_basis;
  if (freeze_adjacency && !opts.fixed_basis && !opts.ablation.no_gft) {
    frozen_w = opts.ablation.no_latent_correlation && opts.graph_override ? *opts.graph_override
                                                                          : model::window_adjacency(net, window);
    frozen_basis = spectral::jacobi_eigh(spectral::normalized_laplacian(frozen_w));
    opts.graph_override = &frozen_w;
    opts.fixed_basis = &frozen_basis;
  }
  return rolling_forecast([&](const Tensor& x) { return model::predict(net, x, opts).forecast; }, window, horizon);
}

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth, const char* what) {
  if (pred.size() != truth.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " targets");
  }
  if (pred.empty()) throw DataError(std::string(what) + ": empty input");
}

}  // namespace

double metric_mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double metric_rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

MapeResult metric_mape(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "mape");
  MapeResult r;
  double s = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(truth[i]) < 1e-8) {
      ++r.skipped;
      continue;
    }
    s += std::abs((pred[i] - truth[i]) / truth[i]);
    ++used;
  }
  r.percent = used ? 100.0 * s / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

ForecastReport make_report(std::string name, std::size_t horizon, const std::vector<std::size_t>& starts,
                           std::vector<Tensor> predictions, const std::vector<Tensor>& truths) {
  if (predictions.size() != truths.size() || starts.size() != truths.size()) {
    throw DimensionError("make_report: prediction/target/start counts differ");
  }
  ForecastReport r;
  r.model = std::move(name);
  r.horizon = horizon;
  r.window_starts = starts;
  for (std::size_t h = 0; h < horizon; ++h) {
    std::vector<double> p, t;
    for (std::size_t w = 0; w < truths.size(); ++w) {
      require_same_shape(predictions[w], truths[w], "make_report");
      const std::size_t n = truths[w].dim(0);
      for (std::size_t i = 0; i < n; ++i) {
        p.push_back(predictions[w].at(i, h));
        t.push_back(truths[w].at(i, h));
      }
    }
    const MapeResult mape = metric_mape(p, t);
    r.per_step.push_back({metric_mae(p, t), mape.percent, metric_rmse(p, t), mape.skipped});
  }
  for (const auto& s : r.per_step) {
    r.averaged.mae += s.mae;
    r.averaged.mape += s.mape;
    r.averaged.rmse += s.rmse;
    r.averaged.mape_skipped += s.mape_skipped;
  }
  const double steps = static_cast<double>(horizon);
  r.averaged.mae /= steps;
  r.averaged.mape /= steps;
  r.averaged.rmse /= steps;
  r.predictions = std::move(predictions);
  return r;
}

std::vector<Window> horizon_windows(training::IndexRange range, std::size_t window, std::size_t horizon) {
  return training::make_windows(range, window, horizon);
}

ForecastReport evaluate(const model::NetworkParams& net, const training::PreparedData& data,
                        const std::vector<Window>& windows, std::size_t horizon,
                        const model::ForwardOptions& options, bool freeze_adjacency) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Tensor> preds, truths;
  std::vector<std::size_t> starts;
  for (const auto& w : windows) {
    if (w.horizon < horizon) throw ConfigError("evaluate: window horizon shorter than the requested horizon");
    const Window target_window{w.start, w.length, horizon};
    const Tensor pred =
        rolling_forecast(net, training::window_input(data.normalized, w), horizon, options, freeze_adjacency);
    preds.push_back(training::invert_normalization(data.norm, pred));
    truths.push_back(training::invert_normalization(data.norm, training::window_target(data.normalized, target_window)));
    starts.push_back(w.start);
  }
  ForecastReport r = make_report("stemgnn", horizon, starts, std::move(preds), truths);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<ForecastReport> naive_baselines(const Tensor& raw_values, const std::vector<Window>& windows,
                                            std::size_t horizon) {
  const Forecaster repeat_last = [](const Tensor& x) {
    const std::size_t n = x.dim(0), k = x.dim(1);
    Tensor y({n, 1});
    for (std::size_t i = 0; i < n; ++i) y.at(i, 0) = x.at(i, k - 1);
    return y;
  };
  const Forecaster moving_average = [](const Tensor& x) {
    const std::size_t n = x.dim(0), k = x.dim(1), m = std::min<std::size_t>(3, k);
    Tensor y({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k - m; j < k; ++j) s += x.at(i, j);
      y.at(i, 0) = s / static_cast<double>(m);
    }
    return y;
  };
  std::vector<ForecastReport> out;
  for (const auto& [name, f] : {std::pair{"repeat-last", repeat_last}, std::pair{"moving-average-3", moving_average}}) {
    std::vector<Tensor> preds, truths;
    std::vector<std::size_t> starts;
    for (const auto& w : windows) {
      preds.push_back(rolling_forecast(f, training::window_input(raw_values, w), horizon));
      truths.push_back(training::window_target(raw_values, Window{w.start, w.length, horizon}));
      starts.push_back(w.start);
    }
    out.push_back(make_report(name, horizon, starts, std::move(preds), truths));
  }
  return out;
}

std::vector<AblationRow> run_ablations(const training::Dataset& dataset, const training::TrainConfig& config,
                                       const std::optional<Tensor>& graph, const std::vector<std::uint64_t>& seeds,
                                       std::size_t horizon, const std::vector<model::Variant>& variants) {
  if (seeds.empty()) throw ConfigError("run_ablations: at least one seed is required");
  std::vector<AblationRow> rows;
  std::optional<std::uint64_t> reference_fp;
  for (model::Variant v : variants) {
    AblationRow row;
    row.variant = v;
    row.label = model::variant_label(v);
    for (std::uint64_t seed : seeds) {
      training::TrainConfig cfg = config;
      cfg.seed = seed;
      cfg.ablation = model::variant_flags(v);
      const training::TrainResult tr = training::train(dataset, cfg, graph);
      if (!reference_fp) reference_fp = tr.data_fingerprint;
      if (tr.data_fingerprint != *reference_fp) {
        throw IntegrityError("ablation '" + row.label + "' saw different training data");
      }
      row.data_fingerprints.push_back(tr.data_fingerprint);
      const std::vector<Window> windows =
          horizon_windows(tr.data.splits.test, cfg.model.window, horizon);
      model::ForwardOptions opts;
      opts.ablation = cfg.ablation;
      opts.graph_override = graph ? &*graph : nullptr;
      std::optional<spectral::SpectralBasis> frozen;
      if (cfg.freeze_graph && !cfg.ablation.no_gft) {
        Tensor w = cfg.ablation.no_latent_correlation ? *graph
                                                      : export_adjacency(tr.params, tr.data.normalized,
                                                                         tr.data.train_windows, opts);
        frozen = spectral::jacobi_eigh(spectral::normalized_laplacian(w));
        opts.fixed_basis = &*frozen;
      }
      ForecastReport rep = evaluate(tr.params, tr.data, windows, horizon, opts);
      rep.model = row.label;
      row.per_seed.push_back(std::move(rep));
    }
    const double k = static_cast<double>(row.per_seed.size());
    for (const auto& rep : row.per_seed) {
      row.mean.mae += rep.averaged.mae / k;
      row.mean.mape += rep.averaged.mape / k;
      row.mean.rmse += rep.averaged.rmse / k;
      row.mean.mape_skipped += rep.averaged.mape_skipped;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor export_adjacency(const model::NetworkParams& net, const Tensor& normalized, const std::vector<Window>& windows,
                        const model::ForwardOptions& options) {
  const std::size_t n = net.config.nodes;
  if (options.ablation.no_latent_correlation) {
    if (!options.graph_override) throw ConfigError("export_adjacency: no graph for the w/o LC variant");
    return *options.graph_override;
  }
  if (windows.empty()) throw DataError("export_adjacency: no windows");
  Tensor acc({n, n});
  for (const auto& w : windows) acc = add(acc, model::window_adjacency(net, training::window_input(normalized, w)));
  return scale(acc, 1.0 / static_cast<double>(windows.size()));
}

SpectralComponents export_spectral_components(const model::NetworkParams& net, const spectral::SpectralBasis& basis,
                                              const Tensor& series, std::size_t k, ComponentOrder order) {
  require_rank(series, 2, "export_spectral_components");
  const std::size_t n = basis.nodes(), t = series.dim(1);
  if (series.dim(0) != n || n != net.config.nodes) {
    throw DimensionError("export_spectral_components: series " + shape_string(series.shape()) + " for a " +
                         std::to_string(n) + "-node basis");
  }
  if (k == 0 || k > n) throw ConfigError("export_spectral_components: k must be in [1, " + std::to_string(n) + "]");

  SpectralComponents out;
  for (std::size_t j = 0; j < k; ++j) out.eigen_index.push_back(order == ComponentOrder::kLargest ? n - 1 - j : j);
  for (std::size_t j : out.eigen_index) out.eigenvalues.push_back(basis.lambda[j]);

  ad::Tape tape;
  Binding params(tape, net.store, false);
  ad::Var U = tape.constant(basis.U);
  ad::Var x = tape.constant(series);
  const Tensor projected = spectral::gft(U, x).value();  // [N x T]
  ad::Var lifted = model::lift_channels(net.block1, params, x);
  ad::Var cell = model::spe_seq_cell(net.block1.spe_seq, params, spectral::gft(U, lifted), true, net.config.tied_gate);
  const Tensor& cv = cell.value();  // [C x N x T]
  const std::size_t c = cv.dim(0);

  out.gft = Tensor({k, t});
  out.cell = Tensor({k, t});
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t j = out.eigen_index[r];
    for (std::size_t s = 0; s < t; ++s) {
      out.gft.at(r, s) = projected.at(j, s);
      double m = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) m += cv.at(ch, j, s);
      out.cell.at(r, s) = m / static_cast<double>(c);
    }
  }
  return out;
}

namespace {

nlohmann::json metrics_json(const StepMetrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"mae", num(m.mae)}, {"mape", num(m.mape)}, {"rmse", num(m.rmse)}, {"mape_skipped", m.mape_skipped}};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_report_json(std::ostream& os, const std::vector<ForecastReport>& reports, const std::string& extra_json) {
  nlohmann::json doc;
  doc["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j;
    j["model"] = r.model;
    j["horizon"] = r.horizon;
    j["windows"] = r.window_starts.size();
    j["averaged"] = metrics_json(r.averaged);
    j["per_step"] = nlohmann::json::array();
    for (const auto& s : r.per_step) j["per_step"].push_back(metrics_json(s));
    if (!r.config_fingerprint.empty()) j["config_fingerprint"] = r.config_fingerprint;
    j["seconds"] = r.seconds;
    doc["reports"].push_back(std::move(j));
  }
  if (!extra_json.empty()) doc["context"] = nlohmann::json::parse(extra_json);
  os << doc.dump(2) << "\n";
}

void write_predictions_csv(std::ostream& os, const ForecastReport& report, const std::vector<std::string>& node_names) {
  os << "window_start,step,node,prediction\n";
  for (std::size_t w = 0; w < report.predictions.size(); ++w) {
    const Tensor& p = report.predictions[w];
    for (std::size_t h = 0; h < p.dim(1); ++h)
      for (std::size_t i = 0; i < p.dim(0); ++i) {
        const std::string name = i < node_names.size() ? node_names[i] : std::to_string(i);
        os << report.window_starts[w] << ',' << h + 1 << ',' << name << ',' << fmt(p.at(i, h)) << '\n';
      }
  }
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "variant,mae,rmse,mape,seeds\n";
  for (const auto& r : rows) {
    os << r.label << ',' << fmt(r.mean.mae) << ',' << fmt(r.mean.rmse) << ',' << fmt(r.mean.mape) << ','
       << r.per_seed.size() << '\n';
  }
}

void write_matrix_csv(std::ostream& os, const Tensor& m, const std::vector<std::string>& names) {
  require_rank(m, 2, "write_matrix_csv");
  auto name = [&](std::size_t i) { return i < names.size() ? names[i] : std::to_string(i); };
  os << "node";
  for (std::size_t j = 0; j < m.dim(1); ++j) os << ',' << name(j);
  os << '\n';
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    os << name(i);
    for (std::size_t j = 0; j < m.dim(1); ++j) os << ',' << fmt(m.at(i, j));
    os << '\n';
  }
}

void write_components_csv(std::ostream& os, const SpectralComponents& c) {
  os << "t";
  for (std::size_t r = 0; r < c.eigen_index.size(); ++r) os << ",gft_" << c.eigen_index[r];
  for (std::size_t r = 0; r < c.eigen_index.size(); ++r) os << ",cell_" << c.eigen_index[r];
  os << '\n';
  os << "#eigenvalue";
  for (int pass = 0; pass < 2; ++pass)
    for (double l : c.eigenvalues) os << ',' << fmt(l);
  os << '\n';
  for (std::size_t s = 0; s < c.gft.dim(1); ++s) {
    os << s;
    for (std::size_t r = 0; r < c.gft.dim(0); ++r) os << ',' << fmt(c.gft.at(r, s));
    for (std::size_t r = 0; r < c.cell.dim(0); ++r) os << ',' << fmt(c.cell.at(r, s));
    os << '\n';
  }
}

}  // namespace stemgnn::eval
