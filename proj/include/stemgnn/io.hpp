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

#ifndef STEMGNN_IO_HPP
#define STEMGNN_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stemgnn/training.hpp"

namespace stemgnn::io {

// ---- datasets --------------------------------------------------------------

/// Header of node names, then one row of N values per timestamp.
training::Dataset parse_csv(std::istream& in, const std::string& source = "<stream>");
training::Dataset load_csv(const std::string& path);
void write_dataset_csv(std::ostream& os, const training::Dataset& dataset);

/// Square matrix CSV: header "node,<names...>", then one named row per node.
Tensor load_adjacency(const std::string& path);

// ---- synthetic data --------------------------------------------------------

struct SynthOptions {
  std::string kind = "graph-diffusion-sines";  // or "covid-like"
  std::size_t nodes = 8;
  std::size_t length = 600;
  std::uint64_t seed = 1;
  std::size_t sinusoids = 2;   // graph-diffusion-sines only
  double noise_fraction = 0.05;  // noise sigma relative to the clean amplitude
};

struct SynthData {
  training::Dataset dataset;
  Tensor adjacency;  // symmetric, zero diagonal
  std::vector<std::size_t> periods;  // integer sinusoid periods (graph-diffusion-sines)
};

SynthData synthesize(const SynthOptions& options);
/// Writes the series CSV and the adjacency CSV.
void write_synth(const SynthData& data, const std::string& series_path, const std::string& adjacency_path);

// ---- run configuration -----------------------------------------------------

struct RunConfig {
  std::string dataset;
  std::string adjacency;  // empty when absent
  std::string output_dir = ".";
  std::size_t horizon = 1;  // rolling evaluation horizon H
  bool freeze_adjacency = false;  // reuse the first window's W during rolling
  training::TrainConfig train;

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

std::string serialize_config(const RunConfig& config);
/// `key = value` lines, `#` comments, unknown keys rejected. Missing keys keep
/// their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);
/// Applies one `key=value` override on top of a config.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// ---- checkpoints -----------------------------------------------------------

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Text format: `name ndim d1 .. dk` then the values (17 significant digits),
/// ending in `#checksum <hex>` where hex is FNV-1a 64 over all preceding bytes.
void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& in, const std::string& source = "<stream>");

void save_checkpoint(const model::NetworkParams& params, const std::string& path);
/// Rebuilds the network from the stored model config.
model::NetworkParams load_checkpoint(const std::string& path);
/// Also verifies the stored config equals `expected`.
model::NetworkParams load_checkpoint(const std::string& path, const model::ModelConfig& expected);

void save_train_state(const training::TrainState& state, const std::string& path);
training::TrainState load_train_state(const std::string& path);

std::uint64_t fnv1a(const std::string& bytes);
/// Stable hash of the serialised config, as 16 hex digits.
std::string config_fingerprint(const RunConfig& config);

}  // namespace stemgnn::io

#endif  // STEMGNN_IO_HPP
