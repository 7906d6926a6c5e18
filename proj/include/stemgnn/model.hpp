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

#ifndef STEMGNN_MODEL_HPP
#define STEMGNN_MODEL_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stemgnn/autodiff.hpp"
#include "stemgnn/correlation.hpp"
#include "stemgnn/params.hpp"
#include "stemgnn/spectral.hpp"

namespace stemgnn::model {

struct ModelConfig {
  std::size_t nodes = 0;
  std::size_t window = 12;
  std::size_t horizon = 1;  // direct head length; rolling inference covers longer horizons
  std::size_t channels = 64;
  std::size_t basis = 16;
  std::size_t attention_dim = 32;
  std::size_t gru_hidden = 32;
  std::size_t kernel = 3;
  bool tied_gate = false;  // gate conv reuses the value conv

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AblationFlags {
  bool no_latent_correlation = false;  // use a provided graph instead of attention
  bool no_spe_seq = false;             // Spe-Seq cell replaced by the identity
  bool no_dft = false;                 // cell convolutions run in the time domain
  bool no_gft = false;                 // basis := I, lambda := 0
  bool no_residual = false;            // output from block 1 only
  bool no_backcast = false;            // drop the reconstruction loss term

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

enum class Variant { kFull, kNoLatentCorrelation, kNoSpeSeq, kNoDft, kNoGft, kNoResidual, kNoBackcast };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::kFull,  Variant::kNoLatentCorrelation, Variant::kNoSpeSeq,  Variant::kNoDft,
    Variant::kNoGft, Variant::kNoResidual,          Variant::kNoBackcast};

// Row labels used in ablation tables.
std::string variant_label(Variant v);
AblationFlags variant_flags(Variant v);

struct SpeSeqParams {
  struct Part {
    Slot value_kernel = 0, value_bias = 0;  // [C x C x tau], [C]
    Slot gate_kernel = 0, gate_bias = 0;
  };
  Part real;
  Part imag;
};

/// theta [C_in x C_out x N]: one coefficient per eigenvalue index and channel pair.
struct GraphConvKernel {
  Slot theta = 0;
};

/// Basis expansion head: coefficients = flatten(Z) * W + b, output = V * coefficients.
struct BasisHead {
  Slot coeff_weight = 0;  // [C*N*K x B]
  Slot coeff_bias = 0;    // [B]
  Slot basis = 0;         // [D x B]
};

struct BlockParams {
  Slot lift_weight = 0;  // [1 x C] channel embedding of the scalar input
  Slot lift_bias = 0;    // [C]
  SpeSeqParams spe_seq;
  GraphConvKernel graph_kernel;
  BasisHead forecast;
  BasisHead backcast;
};

struct OutputLayer {
  Slot value_weight = 0, value_bias = 0;
  Slot gate_weight = 0, gate_bias = 0;
  Slot out_weight = 0, out_bias = 0;
};

struct NetworkParams {
  ModelConfig config;
  ParamStore store;
  correlation::GruParams gru;
  correlation::AttentionParams attn;
  BlockParams block1;
  BlockParams block2;
  OutputLayer output;
};

/// Deterministic initialisation: Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
NetworkParams init_network(const ModelConfig& config, std::uint64_t seed);

/// Coarse grouping of a parameter name: gru, attention, spe_seq,
/// graph_kernel, basis or fc.
std::string param_group(const std::string& name);

/// Frequency-domain cell on X [C x N x K]: DFT along time, value/gate convs and
/// GLU on the real and imaginary parts separately, inverse DFT (real part).
/// With use_dft=false the real-part convs act on the raw series.
ad::Var spe_seq_cell(const SpeSeqParams& p, const Binding& params, ad::Var x, bool use_dft = true,
                     bool tied_gate = false);

/// Z = igft(sum_i diag(theta[i, j, :]) * X_hat_i) for X_hat [C x N x K] already
/// in the graph-spectral domain.
ad::Var spectral_graph_conv(ad::Var U, const GraphConvKernel& kernel, const Binding& params,
                            ad::Var x_hat);

/// 1x1 embedding of X [N x K] into [C x N x K].
ad::Var lift_channels(const BlockParams& p, const Binding& params, ad::Var x);

struct BlockOutput {
  ad::Var backcast;  // [N x K]
  ad::Var forecast;  // [N x h_out]
};

BlockOutput block_forward(const BlockParams& p, const ModelConfig& config, const Binding& params,
                          ad::Var U, ad::Var x, const AblationFlags& flags = {});

struct ForwardOptions {
  AblationFlags ablation;
  const Tensor* graph_override = nullptr;             // required by no_latent_correlation
  const spectral::SpectralBasis* fixed_basis = nullptr;  // skips W and eigh entirely
};

struct ForwardResult {
  ad::Var backcast;   // [N x K]
  ad::Var forecast;   // [N x h_out]
  ad::Var adjacency;  // [N x N]
};

ForwardResult network_forward(const NetworkParams& net, const Binding& params, ad::Var x,
                              const ForwardOptions& options = {});

struct Prediction {
  Tensor backcast;
  Tensor forecast;
  Tensor adjacency;
};

/// Untrained-path forward on a private tape (no gradient bookkeeping).
Prediction predict(const NetworkParams& net, const Tensor& x, const ForwardOptions& options = {});

/// Adjacency used for a window: the override graph, or the learned W.
Tensor window_adjacency(const NetworkParams& net, const Tensor& x);

/// Joint objective for one window:
/// ||forecast - target||^2 + [use_backcast] ||backcast - input||^2.
ad::Var window_loss(const ForwardResult& out, ad::Var target, ad::Var input, bool use_backcast);

}  // namespace stemgnn::model

#endif  // STEMGNN_MODEL_HPP
