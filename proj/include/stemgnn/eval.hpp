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

#ifndef STEMGNN_EVAL_HPP
#define STEMGNN_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stemgnn/model.hpp"
#include "stemgnn/training.hpp"

namespace stemgnn::eval {

/// One-step predictor: window [N x K] -> forecast whose first column is used.
using Forecaster = std::function<Tensor(const Tensor&)>;

/// Predicts H steps by repeatedly dropping the oldest column and appending the
/// previous prediction. Returns [N x H].
Tensor rolling_forecast(const Forecaster& step, const Tensor& window, std::size_t horizon);

/// Network version. The adjacency is recomputed from every rolled window unless
/// freeze_adjacency is set, in which case W from the initial window is reused.
Tensor rolling_forecast(const model::NetworkParams& net, const Tensor& window, std::size_t horizon,
                        const model::ForwardOptions& options = {}, bool freeze_adjacency = false);

double metric_mae(std::span<const double> pred, std::span<const double> truth);
double metric_rmse(std::span<const double> pred, std::span<const double> truth);

struct MapeResult {
  double percent = 0.0;
  std::size_t skipped = 0;  // entries with |truth| < 1e-8
};
MapeResult metric_mape(std::span<const double> pred, std::span<const double> truth);

struct StepMetrics {
  double mae = 0.0;
  double mape = 0.0;  // percent
  double rmse = 0.0;
  std::size_t mape_skipped = 0;
};

struct ForecastReport {
  std::string model;
  std::size_t horizon = 0;
  std::vector<StepMetrics> per_step;
  StepMetrics averaged;  // mean of per_step
  std::vector<std::size_t> window_starts;
  std::vector<Tensor> predictions;  // [N x H] per window, original scale
  std::string config_fingerprint;
  double seconds = 0.0;
};

/// Metrics per horizon step over all windows and nodes (original scale).
ForecastReport make_report(std::string name, std::size_t horizon, const std::vector<std::size_t>& starts,
                           std::vector<Tensor> predictions, const std::vector<Tensor>& truths);

/// Test windows of length K that leave room for H targets inside `range`.
std::vector<training::Window> horizon_windows(training::IndexRange range, std::size_t window, std::size_t horizon);

/// Rolling evaluation of a trained network; predictions are de-normalised
/// before the metrics.
ForecastReport evaluate(const model::NetworkParams& net, const training::PreparedData& data,
                        const std::vector<training::Window>& windows, std::size_t horizon,
                        const model::ForwardOptions& options = {}, bool freeze_adjacency = false);

/// Repeat-last and rolled moving-average-3 on the raw series.
std::vector<ForecastReport> naive_baselines(const Tensor& raw_values, const std::vector<training::Window>& windows,
                                            std::size_t horizon);

struct AblationRow {
  model::Variant variant;
  std::string label;
  std::vector<ForecastReport> per_seed;
  StepMetrics mean;  // averaged over seeds
  std::vector<std::uint64_t> data_fingerprints;
};

/// Trains and evaluates the full model and all six ablations with identical
/// seeds. The graph is needed by the w/o LC row.
std::vector<AblationRow> run_ablations(const training::Dataset& dataset, const training::TrainConfig& config,
                                       const std::optional<Tensor>& graph, const std::vector<std::uint64_t>& seeds,
                                       std::size_t horizon,
                                       const std::vector<model::Variant>& variants = {model::kAllVariants.begin(),
                                                                                      model::kAllVariants.end()});

/// Mean adjacency over the given windows (the learned W, or the override graph).
Tensor export_adjacency(const model::NetworkParams& net, const Tensor& normalized,
                        const std::vector<training::Window>& windows, const model::ForwardOptions& options = {});

enum class ComponentOrder { kLargest, kSmallest };

struct SpectralComponents {
  std::vector<std::size_t> eigen_index;  // which eigenvector each component uses
  std::vector<double> eigenvalues;
  Tensor gft;   // [k x T]: u_j^T X
  Tensor cell;  // [k x T]: channel mean of the Spe-Seq cell output for row j
};

/// Projects the series onto k eigenvectors of `basis` and runs the block-1
/// channel lift and Spe-Seq cell over the full length.
SpectralComponents export_spectral_components(const model::NetworkParams& net, const spectral::SpectralBasis& basis,
                                              const Tensor& series, std::size_t k,
                                              ComponentOrder order = ComponentOrder::kLargest);

void write_report_json(std::ostream& os, const std::vector<ForecastReport>& reports, const std::string& extra_json = "");
void write_predictions_csv(std::ostream& os, const ForecastReport& report, const std::vector<std::string>& node_names);
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);
void write_matrix_csv(std::ostream& os, const Tensor& m, const std::vector<std::string>& names);
void write_components_csv(std::ostream& os, const SpectralComponents& c);

}  // namespace stemgnn::eval

#endif  // STEMGNN_EVAL_HPP
