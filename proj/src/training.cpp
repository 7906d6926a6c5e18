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

#include "stemgnn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stemgnn/errors.hpp"
#include "stemgnn/random.hpp"
#include "stemgnn/spectral.hpp"

namespace stemgnn::training {

std::string norm_kind_name(NormKind kind) {
  switch (kind) {
    case NormKind::kZScore: return "zscore";
    case NormKind::kMinMax: return "minmax";
    case NormKind::kNone: return "none";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& name) {
  if (name == "zscore") return NormKind::kZScore;
  if (name == "minmax") return NormKind::kMinMax;
  if (name == "none") return NormKind::kNone;
  throw ConfigError("unknown normalization '" + name + "' (expected zscore, minmax or none)");
}

NormStats fit_normalization(NormKind kind, const Tensor& train_values) {
  require_rank(train_values, 2, "fit_normalization");
  const std::size_t n = train_values.dim(0), t = train_values.dim(1);
  NormStats stats;
  stats.kind = kind;
  if (kind == NormKind::kNone) return stats;
  if (t == 0) throw DataError("fit_normalization: empty training range");
  if (kind == NormKind::kZScore) {
    stats.mean = Tensor({n});
    stats.stddev = Tensor({n});
    for (std::size_t i = 0; i < n; ++i) {
      double mu = 0.0;
      for (std::size_t j = 0; j < t; ++j) mu += train_values.at(i, j);
      mu /= static_cast<double>(t);
      double var = 0.0;
      for (std::size_t j = 0; j < t; ++j) var += (train_values.at(i, j) - mu) * (train_values.at(i, j) - mu);
      const double sd = std::sqrt(var / static_cast<double>(t));
      if (!(sd > 0.0)) throw DataError("z-score normalization: node " + std::to_string(i) + " is constant");
      stats.mean[i] = mu;
      stats.stddev[i] = sd;
    }
  } else {
    stats.min = Tensor({n});
    stats.max = Tensor({n});
    for (std::size_t i = 0; i < n; ++i) {
      double lo = train_values.at(i, 0), hi = lo;
      for (std::size_t j = 1; j < t; ++j) {
        lo = std::min(lo, train_values.at(i, j));
        hi = std::max(hi, train_values.at(i, j));
      }
      if (!(hi > lo)) throw DataError("min-max normalization: node " + std::to_string(i) + " has max == min");
      stats.min[i] = lo;
      stats.max[i] = hi;
    }
  }
  return stats;
}

namespace {

void check_rows(const NormStats& stats, const Tensor& values) {
  require_rank(values, 2, "normalization");
  const std::size_t n = stats.kind == NormKind::kZScore ? stats.mean.size()
                        : stats.kind == NormKind::kMinMax ? stats.min.size()
                                                          : values.dim(0);
  if (values.dim(0) != n) {
    throw DimensionError("normalization: stats for " + std::to_string(n) + " nodes, values " +
                         shape_string(values.shape()));
  }
}

}  // namespace

Tensor apply_normalization(const NormStats& stats, const Tensor& values) {
  check_rows(stats, values);
  Tensor out = values;
  const std::size_t n = values.dim(0), t = values.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      double& v = out.at(i, j);
      if (stats.kind == NormKind::kZScore) v = (v - stats.mean[i]) / stats.stddev[i];
      if (stats.kind == NormKind::kMinMax) v = (v - stats.min[i]) / (stats.max[i] - stats.min[i]);
    }
  return out;
}

Tensor invert_normalization(const NormStats& stats, const Tensor& values) {
  check_rows(stats, values);
  Tensor out = values;
  const std::size_t n = values.dim(0), t = values.dim(1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      double& v = out.at(i, j);
      if (stats.kind == NormKind::kZScore) v = v * stats.stddev[i] + stats.mean[i];
      if (stats.kind == NormKind::kMinMax) v = v * (stats.max[i] - stats.min[i]) + stats.min[i];
    }
  return out;
}

std::vector<Window> make_windows(IndexRange range, std::size_t window, std::size_t horizon) {
  if (window == 0 || horizon == 0) throw ConfigError("make_windows: window and horizon must be positive");
  if (range.size() < window + horizon) {
    throw DataError("series range of length " + std::to_string(range.size()) + " is too short: need at least " +
                    std::to_string(window + horizon) + " steps (window " + std::to_string(window) + " + horizon " +
                    std::to_string(horizon) + ")");
  }
  std::vector<Window> out;
  for (std::size_t start = range.begin + window; start + horizon <= range.end; ++start)
    out.push_back({start, window, horizon});
  return out;
}

std::vector<Window> make_windows(const Tensor& values, std::size_t window, std::size_t horizon) {
  require_rank(values, 2, "make_windows");
  return make_windows(IndexRange{0, values.dim(1)}, window, horizon);
}

SplitRanges split(std::size_t length, const std::array<double, 3>& ratios, std::size_t window,
                  std::size_t horizon) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (ratios[0] <= 0.0 || ratios[2] <= 0.0) throw ConfigError("train and test ratios must be positive");

  auto boundary = [&](double cum) {
    return std::min(length, static_cast<std::size_t>(std::floor(static_cast<double>(length) * cum + 1e-9)));
  };
  const std::size_t b1 = boundary(ratios[0]);
  const std::size_t b2 = ratios[1] > 0.0 ? boundary(ratios[0] + ratios[1]) : b1;
  SplitRanges s{{0, b1}, {b1, b2}, {b2, length}};
  const std::array<std::pair<const char*, IndexRange>, 3> named = {
      {{"train", s.train}, {"validation", s.val}, {"test", s.test}}};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [name, range] = named[i];
    if (ratios[i] == 0.0) continue;
    if (range.size() < window + horizon) {
      throw DataError(std::string(name) + " range [" + std::to_string(range.begin) + "," + std::to_string(range.end) +
                      ") is shorter than the required minimum of " + std::to_string(window + horizon) + " steps");
    }
  }
  return s;
}

Tensor window_input(const Tensor& values, const Window& w) {
  const std::size_t n = values.dim(0);
  Tensor x({n, w.length});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w.length; ++j) x.at(i, j) = values.at(i, w.start - w.length + j);
  return x;
}

Tensor window_target(const Tensor& values, const Window& w) {
  const std::size_t n = values.dim(0);
  Tensor y({n, w.horizon});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w.horizon; ++j) y.at(i, j) = values.at(i, w.start + j);
  return y;
}

WindowBatch make_batch(const Tensor& values, const std::vector<Window>& windows) {
  require_rank(values, 2, "make_batch");
  const std::size_t n = values.dim(0);
  const std::size_t k = windows.empty() ? 0 : windows.front().length;
  const std::size_t h = windows.empty() ? 0 : windows.front().horizon;
  WindowBatch batch{Tensor({windows.size(), n, k}), Tensor({windows.size(), n, h}), {}};
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const Tensor x = window_input(values, windows[b]);
    const Tensor y = window_target(values, windows[b]);
    std::copy(x.data().begin(), x.data().end(), batch.inputs.data().begin() + b * n * k);
    std::copy(y.data().begin(), y.data().end(), batch.targets.data().begin() + b * n * h);
    batch.window_start_indices.push_back(windows[b].start);
  }
  return batch;
}

std::uint64_t fingerprint(const WindowBatch& batch) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(batch.inputs.data().data(), batch.inputs.size() * sizeof(double));
  mix(batch.targets.data().data(), batch.targets.size() * sizeof(double));
  for (std::size_t s : batch.window_start_indices) {
    const std::uint64_t v = s;
    mix(&v, sizeof v);
  }
  return h;
}

double joint_loss(const Tensor& forecast, const Tensor& target, const Tensor& backcast, const Tensor& input,
                  bool use_backcast) {
  require_same_shape(forecast, target, "joint_loss forecast");
  double loss = 0.0;
  for (std::size_t i = 0; i < forecast.size(); ++i) loss += (forecast[i] - target[i]) * (forecast[i] - target[i]);
  if (use_backcast) {
    require_same_shape(backcast, input, "joint_loss backcast");
    for (std::size_t i = 0; i < backcast.size(); ++i) loss += (backcast[i] - input[i]) * (backcast[i] - input[i]);
  }
  return loss;
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs == 0 || batch_size == 0 || decay_every == 0) {
    throw ConfigError("epochs, batch size and decay period must be positive");
  }
  if (!(learning_rate >= 0.0) || !(decay_rate > 0.0) || !(rho > 0.0 && rho < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("invalid optimizer hyperparameters");
  }
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  return config.learning_rate * std::pow(config.decay_rate, static_cast<double>(epoch / config.decay_every));
}

RmsPropState make_rmsprop(const ParamStore& params, double rho, double epsilon) {
  RmsPropState s{rho, epsilon, {}};
  for (Slot i = 0; i < params.size(); ++i) s.mean_square.emplace_back(params.tensor(i).shape());
  return s;
}

void rmsprop_step(RmsPropState& state, ParamStore& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size() || state.mean_square.size() != params.size()) {
    throw DimensionError("rmsprop_step: parameter/gradient/state count mismatch");
  }
  for (Slot s = 0; s < params.size(); ++s) {
    Tensor& theta = params.tensor(s);
    Tensor& v = state.mean_square[s];
    const Tensor& g = grads[s];
    require_same_shape(theta, g, "rmsprop_step");
    require_same_shape(theta, v, "rmsprop_step");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      v[i] = state.rho * v[i] + (1.0 - state.rho) * g[i] * g[i];
      theta[i] -= lr * g[i] / (std::sqrt(v[i]) + state.epsilon);
    }
  }
}

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,lr,train_loss,val_mae,seconds\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.6f\n", e.epoch, e.lr, e.train_loss, e.val_mae, e.seconds);
    os << buf;
  }
}

PreparedData prepare(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.values.rank() != 2 || dataset.nodes() != config.model.nodes) {
    throw DataError("dataset has " + std::to_string(dataset.values.rank() == 2 ? dataset.nodes() : 0) +
                    " nodes, model expects " + std::to_string(config.model.nodes));
  }
  const std::size_t k = config.model.window, h = config.model.horizon;
  PreparedData d;
  d.splits = split(dataset.length(), config.split_ratios, k, h);
  Tensor train_values({dataset.nodes(), d.splits.train.size()});
  for (std::size_t i = 0; i < dataset.nodes(); ++i)
    for (std::size_t j = 0; j < d.splits.train.size(); ++j) train_values.at(i, j) = dataset.values.at(i, j);
  d.norm = fit_normalization(config.norm, train_values);
  d.normalized = apply_normalization(d.norm, dataset.values);
  d.train_windows = make_windows(d.splits.train, k, h);
  if (d.splits.val.size() > 0) d.val_windows = make_windows(d.splits.val, k, h);
  d.test_windows = make_windows(d.splits.test, k, h);
  return d;
}

double one_step_mae(const model::NetworkParams& net, const PreparedData& data, const std::vector<Window>& windows,
                    const model::ForwardOptions& options) {
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& w : windows) {
    const Tensor pred = model::predict(net, window_input(data.normalized, w), options).forecast;
    const Tensor truth = invert_normalization(data.norm, window_target(data.normalized, w));
    const Tensor denorm = invert_normalization(data.norm, pred);
    for (std::size_t i = 0; i < truth.size(); ++i) total += std::abs(denorm[i] - truth[i]);
    count += truth.size();
  }
  return total / static_cast<double>(count);
}

namespace {

Tensor mean_training_adjacency(const model::NetworkParams& net, const PreparedData& data) {
  const std::size_t n = net.config.nodes;
  Tensor acc({n, n});
  for (const auto& w : data.train_windows) acc = add(acc, model::window_adjacency(net, window_input(data.normalized, w)));
  return scale(acc, 1.0 / static_cast<double>(data.train_windows.size()));
}

}  // namespace

Trainer::Trainer(const Dataset& dataset, TrainConfig config, std::optional<Tensor> graph)
    : config_(std::move(config)), data_(prepare(dataset, config_)), graph_(std::move(graph)) {
  if (config_.ablation.no_latent_correlation && !graph_) {
    throw ConfigError("ablation without latent correlation needs an adjacency graph");
  }
  state_.params = model::init_network(config_.model, config_.seed);
  state_.optimizer = make_rmsprop(state_.params.store, config_.rho, config_.epsilon);
  state_.best = state_.params;
}

Trainer::Trainer(const Dataset& dataset, TrainConfig config, TrainState state, std::optional<Tensor> graph)
    : config_(std::move(config)), data_(prepare(dataset, config_)), graph_(std::move(graph)), state_(std::move(state)) {
  if (!(state_.params.config == config_.model)) throw ConfigError("resumed state does not match the model config");
  if (config_.ablation.no_latent_correlation && !graph_) {
    throw ConfigError("ablation without latent correlation needs an adjacency graph");
  }
}

model::ForwardOptions Trainer::forward_options(const spectral::SpectralBasis* basis) const {
  model::ForwardOptions o;
  o.ablation = config_.ablation;
  o.graph_override = graph_ ? &*graph_ : nullptr;
  o.fixed_basis = basis;
  return o;
}

std::uint64_t Trainer::data_fingerprint() const { return fingerprint(make_batch(data_.normalized, data_.train_windows)); }

const EpochLog& Trainer::run_epoch() {
  if (done()) throw ConfigError("training already finished");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t epoch = state_.next_epoch;
  const double lr = lr_at_epoch(config_, epoch);
  model::NetworkParams& net = state_.params;

  std::optional<spectral::SpectralBasis> frozen;
  if (config_.freeze_graph && !config_.ablation.no_gft) {
    const Tensor w = config_.ablation.no_latent_correlation ? *graph_ : mean_training_adjacency(net, data_);
    frozen = spectral::jacobi_eigh(spectral::normalized_laplacian(w));
  }
  const model::ForwardOptions options = forward_options(frozen ? &*frozen : nullptr);

  std::vector<std::size_t> order(data_.train_windows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::derived(config_.seed, epoch);
  rng.shuffle(order);

  double loss_total = 0.0;
  const bool use_backcast = !config_.ablation.no_backcast;
  for (std::size_t begin = 0, batch_index = 0; begin < order.size(); begin += config_.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), begin + config_.batch_size);
    ad::Tape tape;
    Binding params(tape, net.store);
    ad::Var batch_loss;
    for (std::size_t b = begin; b < end; ++b) {
      const Window& w = data_.train_windows[order[b]];
      ad::Var x = tape.constant(window_input(data_.normalized, w));
      ad::Var y = tape.constant(window_target(data_.normalized, w));
      const model::ForwardResult out = model::network_forward(net, params, x, options);
      ad::Var l = model::window_loss(out, y, x, use_backcast);
      batch_loss = batch_loss.valid() ? batch_loss + l : l;
    }
    const double count = static_cast<double>(end - begin);
    ad::Var mean_loss = ad::scale(batch_loss, 1.0 / count);
    if (!std::isfinite(mean_loss.value()[0])) {
      std::ostringstream os;
      os << "training diverged: non-finite loss at epoch " << epoch << ", batch " << batch_index;
      throw NumericError(os.str());
    }
    loss_total += batch_loss.value()[0];
    tape.backward(mean_loss);
    rmsprop_step(state_.optimizer, net.store, params.gradients(), lr);
  }

  EpochLog entry;
  entry.epoch = epoch;
  entry.lr = lr;
  entry.train_loss = loss_total / static_cast<double>(order.size());
  entry.val_mae = one_step_mae(net, data_, data_.val_windows, options);
  if (data_.val_windows.empty() || !state_.best_val_mae || entry.val_mae < *state_.best_val_mae) {
    state_.best = net;
    state_.best_epoch = epoch;
    if (!data_.val_windows.empty()) state_.best_val_mae = entry.val_mae;
  }
  entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  state_.log.push_back(entry);
  ++state_.next_epoch;
  return state_.log.back();
}

void Trainer::run() {
  while (!done()) run_epoch();
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, std::optional<Tensor> graph) {
  Trainer trainer(dataset, config, std::move(graph));
  trainer.run();
  TrainResult r;
  r.params = trainer.state().best;
  r.final_params = trainer.state().params;
  r.log = trainer.state().log;
  r.best_epoch = trainer.state().best_epoch;
  r.data = trainer.data();
  r.data_fingerprint = trainer.data_fingerprint();
  return r;
}

}  // namespace stemgnn::training
