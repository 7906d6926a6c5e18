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

#ifndef STEMGNN_TRAINING_HPP
#define STEMGNN_TRAINING_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stemgnn/model.hpp"
#include "stemgnn/params.hpp"
#include "stemgnn/tensor.hpp"

namespace stemgnn::training {

/// Multivariate series X [N x T]; row i is node i.
struct Dataset {
  Tensor values;
  std::vector<std::string> node_names;
  std::string granularity;

  std::size_t nodes() const { return values.dim(0); }
  std::size_t length() const { return values.dim(1); }
};

enum class NormKind { kZScore, kMinMax, kNone };

std::string norm_kind_name(NormKind kind);
NormKind parse_norm_kind(const std::string& name);

/// Per-node statistics of the training range. z-score uses the population
/// standard deviation (divisor T_train).
struct NormStats {
  NormKind kind = NormKind::kNone;
  Tensor mean;    // z-score
  Tensor stddev;  // z-score
  Tensor min;     // min-max
  Tensor max;     // min-max
};

NormStats fit_normalization(NormKind kind, const Tensor& train_values);
// values is [N x T'] for any T'.
Tensor apply_normalization(const NormStats& stats, const Tensor& values);
Tensor invert_normalization(const NormStats& stats, const Tensor& values);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Input columns [start - K, start), target columns [start, start + h).
struct Window {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t horizon = 0;

  IndexRange input() const { return {start - length, start}; }
  IndexRange target() const { return {start, start + horizon}; }
};

/// All stride-1 windows fully inside `range`: range.size() - K - h + 1 of them.
std::vector<Window> make_windows(IndexRange range, std::size_t window, std::size_t horizon);
std::vector<Window> make_windows(const Tensor& values, std::size_t window, std::size_t horizon);

struct SplitRanges {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

/// Chronological split at floor(T * cumulative ratio). Non-empty ranges must
/// hold at least K + h steps; a zero ratio yields an empty range.
SplitRanges split(std::size_t length, const std::array<double, 3>& ratios, std::size_t window,
                  std::size_t horizon);

struct WindowBatch {
  Tensor inputs;   // [B x N x K]
  Tensor targets;  // [B x N x h]
  std::vector<std::size_t> window_start_indices;
};

WindowBatch make_batch(const Tensor& values, const std::vector<Window>& windows);
Tensor window_input(const Tensor& values, const Window& w);
Tensor window_target(const Tensor& values, const Window& w);

/// FNV-1a over the batch contents and start indices.
std::uint64_t fingerprint(const WindowBatch& batch);

/// ||forecast - target||^2 + [use_backcast] sum_i ||backcast_i - input_i||^2
/// for one window.
double joint_loss(const Tensor& forecast, const Tensor& target, const Tensor& backcast,
                  const Tensor& window_input, bool use_backcast);

struct TrainConfig {
  model::ModelConfig model;
  std::size_t epochs = 50;
  std::size_t batch_size = 50;
  double learning_rate = 0.001;
  double decay_rate = 0.7;
  std::size_t decay_every = 5;
  double rho = 0.9;
  double epsilon = 1e-8;
  std::array<double, 3> split_ratios = {0.7, 0.2, 0.1};
  std::uint64_t seed = 0;
  NormKind norm = NormKind::kZScore;
  model::AblationFlags ablation;
  bool freeze_graph = false;  // one basis per epoch from the mean training W

  void validate() const;
};

/// lr0 * decay^floor(epoch / period).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

struct RmsPropState {
  double rho = 0.9;
  double epsilon = 1e-8;
  std::vector<Tensor> mean_square;  // one per parameter, zero-initialised
};

RmsPropState make_rmsprop(const ParamStore& params, double rho, double epsilon);

/// v <- rho v + (1 - rho) g^2; theta <- theta - lr g / (sqrt(v) + eps).
void rmsprop_step(RmsPropState& state, ParamStore& params, const std::vector<Tensor>& grads, double lr);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_mae = 0.0;  // NaN when there is no validation range
  double seconds = 0.0;
};

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

/// Everything needed to continue training bit-identically.
struct TrainState {
  model::NetworkParams params;
  RmsPropState optimizer;
  std::size_t next_epoch = 0;
  model::NetworkParams best;
  std::optional<double> best_val_mae;
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Data derived from a dataset and config, shared by training and evaluation.
struct PreparedData {
  SplitRanges splits;
  NormStats norm;
  Tensor normalized;  // [N x T]
  std::vector<Window> train_windows;
  std::vector<Window> val_windows;
  std::vector<Window> test_windows;
};

PreparedData prepare(const Dataset& dataset, const TrainConfig& config);

/// MAE of one-step forecasts on the original scale.
double one_step_mae(const model::NetworkParams& net, const PreparedData& data, const std::vector<Window>& windows,
                    const model::ForwardOptions& options);

/// Epoch loop: shuffle (seeded per epoch), batch, forward, loss, backward,
/// RMSprop step. Single-threaded; deterministic given the config.
class Trainer {
 public:
  // graph is required for the no-latent-correlation ablation.
  Trainer(const Dataset& dataset, TrainConfig config, std::optional<Tensor> graph = std::nullopt);
  // Resume from a saved state.
  Trainer(const Dataset& dataset, TrainConfig config, TrainState state,
          std::optional<Tensor> graph = std::nullopt);

  bool done() const { return state_.next_epoch >= config_.epochs; }
  const EpochLog& run_epoch();
  void run();

  const TrainState& state() const { return state_; }
  const PreparedData& data() const { return data_; }
  const TrainConfig& config() const { return config_; }
  std::uint64_t data_fingerprint() const;

 private:
  model::ForwardOptions forward_options(const spectral::SpectralBasis* basis) const;

  TrainConfig config_;
  PreparedData data_;
  std::optional<Tensor> graph_;
  TrainState state_;
};

struct TrainResult {
  model::NetworkParams params;  // best-validation epoch (last epoch without validation data)
  model::NetworkParams final_params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  PreparedData data;
  std::uint64_t data_fingerprint = 0;
};

TrainResult train(const Dataset& dataset, const TrainConfig& config, std::optional<Tensor> graph = std::nullopt);

}  // namespace stemgnn::training

#endif  // STEMGNN_TRAINING_HPP
