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

#include "stemgnn/model.hpp"

#include "stemgnn/errors.hpp"

namespace stemgnn::model {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(nodes, "node count");
  positive(window, "window length");
  positive(horizon, "horizon");
  positive(channels, "channel count");
  positive(basis, "basis count");
  positive(attention_dim, "attention dimension");
  positive(gru_hidden, "GRU hidden size");
  positive(kernel, "kernel size");
  if (kernel % 2 == 0) throw ConfigError("kernel size must be odd, got " + std::to_string(kernel));
}

std::string variant_label(Variant v) {
  switch (v) {
    case Variant::kFull: return "StemGNN";
    case Variant::kNoLatentCorrelation: return "w/o LC";
    case Variant::kNoSpeSeq: return "w/o Spe-Seq Cell";
    case Variant::kNoDft: return "w/o DFT";
    case Variant::kNoGft: return "w/o GFT";
    case Variant::kNoResidual: return "w/o Residual";
    case Variant::kNoBackcast: return "w/o Backcasting";
  }
  return "?";
}

AblationFlags variant_flags(Variant v) {
  AblationFlags f;
  switch (v) {
    case Variant::kFull: break;
    case Variant::kNoLatentCorrelation: f.no_latent_correlation = true; break;
    case Variant::kNoSpeSeq: f.no_spe_seq = true; break;
    case Variant::kNoDft: f.no_dft = true; break;
    case Variant::kNoGft: f.no_gft = true; break;
    case Variant::kNoResidual: f.no_residual = true; break;
    case Variant::kNoBackcast: f.no_backcast = true; break;
  }
  return f;
}

namespace {

SpeSeqParams::Part add_part(ParamStore& s, const std::string& prefix, std::size_t c, std::size_t tau, Rng& rng) {
  SpeSeqParams::Part p;
  const std::size_t fan_in = c * tau;
  p.value_kernel = s.add_uniform(prefix + "value_kernel", {c, c, tau}, fan_in, rng);
  p.value_bias = s.add_uniform(prefix + "value_bias", {c}, fan_in, rng);
  p.gate_kernel = s.add_uniform(prefix + "gate_kernel", {c, c, tau}, fan_in, rng);
  p.gate_bias = s.add_uniform(prefix + "gate_bias", {c}, fan_in, rng);
  return p;
}

BasisHead add_head(ParamStore& s, const std::string& prefix, std::size_t in, std::size_t b, std::size_t out,
                   Rng& rng) {
  BasisHead h;
  h.coeff_weight = s.add_uniform(prefix + "coeff_weight", {in, b}, in, rng);
  h.coeff_bias = s.add_uniform(prefix + "coeff_bias", {b}, in, rng);
  h.basis = s.add_uniform(prefix + "basis", {out, b}, b, rng);
  return h;
}

BlockParams add_block(ParamStore& s, const std::string& prefix, const ModelConfig& c, Rng& rng) {
  BlockParams b;
  b.lift_weight = s.add_uniform(prefix + "lift.weight", {1, c.channels}, 1, rng);
  b.lift_bias = s.add_uniform(prefix + "lift.bias", {c.channels}, 1, rng);
  b.spe_seq.real = add_part(s, prefix + "spe_seq.real.", c.channels, c.kernel, rng);
  b.spe_seq.imag = add_part(s, prefix + "spe_seq.imag.", c.channels, c.kernel, rng);
  b.graph_kernel.theta =
      s.add_uniform(prefix + "graph_kernel.theta", {c.channels, c.channels, c.nodes}, c.channels, rng);
  const std::size_t flat = c.channels * c.nodes * c.window;
  b.forecast = add_head(s, prefix + "forecast.", flat, c.basis, c.nodes * c.horizon, rng);
  b.backcast = add_head(s, prefix + "backcast.", flat, c.basis, c.nodes * c.window, rng);
  return b;
}

}  // namespace

NetworkParams init_network(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  NetworkParams net;
  net.config = config;
  net.gru = correlation::add_gru(net.store, "gru.", config.gru_hidden, rng);
  net.attn = correlation::add_attention(net.store, "attn.", config.gru_hidden, config.attention_dim, rng);
  net.block1 = add_block(net.store, "block1.", config, rng);
  net.block2 = add_block(net.store, "block2.", config, rng);
  const std::size_t d = config.nodes * config.horizon;
  auto& s = net.store;
  net.output.value_weight = s.add_uniform("output.value_weight", {d, d}, d, rng);
  net.output.value_bias = s.add_uniform("output.value_bias", {d}, d, rng);
  net.output.gate_weight = s.add_uniform("output.gate_weight", {d, d}, d, rng);
  net.output.gate_bias = s.add_uniform("output.gate_bias", {d}, d, rng);
  net.output.out_weight = s.add_uniform("output.out_weight", {d, d}, d, rng);
  net.output.out_bias = s.add_uniform("output.out_bias", {d}, d, rng);
  return net;
}

std::string param_group(const std::string& name) {
  auto ends_with = [&](const std::string& suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (name.rfind("gru.", 0) == 0) return "gru";
  if (name.rfind("attn.", 0) == 0) return "attention";
  if (name.find(".spe_seq.") != std::string::npos) return "spe_seq";
  if (name.find(".graph_kernel.") != std::string::npos) return "graph_kernel";
  if (ends_with(".basis")) return "basis";
  return "fc";
}

namespace {

ad::Var gated_conv(const SpeSeqParams::Part& p, const Binding& params, ad::Var x, bool tied_gate) {
  ad::Var value = ad::conv1d_same(x, params[p.value_kernel], params[p.value_bias]);
  ad::Var gate = tied_gate ? value : ad::conv1d_same(x, params[p.gate_kernel], params[p.gate_bias]);
  return ad::glu(value, gate);
}

}  // namespace

ad::Var spe_seq_cell(const SpeSeqParams& p, const Binding& params, ad::Var x, bool use_dft, bool tied_gate) {
  require_rank(x.value(), 3, "spe_seq_cell");
  if (!use_dft) return gated_conv(p.real, params, x, tied_gate);
  spectral::ComplexVar freq = spectral::dft_dense(x);
  spectral::ComplexVar gated{gated_conv(p.real, params, freq.re, tied_gate),
                             gated_conv(p.imag, params, freq.im, tied_gate)};
  return spectral::idft_dense(gated);
}

ad::Var spectral_graph_conv(ad::Var U, const GraphConvKernel& kernel, const Binding& params, ad::Var x_hat) {
  const Tensor& theta = params[kernel.theta].value();
  if (U.value().dim(0) != x_hat.value().dim(1) || theta.dim(2) != U.value().dim(0)) {
    throw DimensionError("spectral_graph_conv: basis " + shape_string(U.shape()) + ", kernel " +
                         shape_string(theta.shape()) + ", input " + shape_string(x_hat.shape()));
  }
  return spectral::igft(U, ad::spectral_mix(params[kernel.theta], x_hat));
}

ad::Var lift_channels(const BlockParams& p, const Binding& params, ad::Var x) {
  require_rank(x.value(), 2, "lift_channels");
  const std::size_t n = x.value().dim(0), k = x.value().dim(1);
  const std::size_t c = params[p.lift_bias].value().size();
  ad::Var column = ad::reshape(x, {n * k, 1});
  ad::Var lifted = ad::add_row_bias(ad::matmul(column, params[p.lift_weight]), params[p.lift_bias]);
  return ad::reshape(ad::transpose(lifted), {c, n, k});
}

namespace {

ad::Var expand(const BasisHead& head, const Binding& params, ad::Var flat, Shape out_shape) {
  ad::Var coeff = ad::add_row_bias(ad::matmul(flat, params[head.coeff_weight]), params[head.coeff_bias]);
  return ad::reshape(ad::matmul(params[head.basis], ad::transpose(coeff)), std::move(out_shape));
}

}  // namespace

BlockOutput block_forward(const BlockParams& p, const ModelConfig& config, const Binding& params, ad::Var U,
                          ad::Var x, const AblationFlags& flags) {
  require_rank(x.value(), 3, "block_forward");
  const std::size_t c = x.value().dim(0), n = x.value().dim(1), k = x.value().dim(2);
  ad::Var x_hat = spectral::gft(U, x);
  ad::Var cell = flags.no_spe_seq ? x_hat : spe_seq_cell(p.spe_seq, params, x_hat, !flags.no_dft, config.tied_gate);
  ad::Var z = spectral_graph_conv(U, p.graph_kernel, params, cell);
  ad::Var flat = ad::reshape(z, {1, c * n * k});
  const std::size_t h_out = params[p.forecast.basis].value().dim(0) / n;
  return {expand(p.backcast, params, flat, {n, k}), expand(p.forecast, params, flat, {n, h_out})};
}

namespace {

ad::Var affine(const Binding& params, Slot w, Slot b, ad::Var x) {
  return ad::add_row_bias(ad::matmul(x, params[w]), params[b]);
}

}  // namespace

ForwardResult network_forward(const NetworkParams& net, const Binding& params, ad::Var x,
                              const ForwardOptions& options) {
  const ModelConfig& cfg = net.config;
  const AblationFlags& flags = options.ablation;
  if (x.value().rank() != 2 || x.value().dim(0) != cfg.nodes || x.value().dim(1) != cfg.window) {
    throw DimensionError("network_forward: expected window [" + std::to_string(cfg.nodes) + "x" +
                         std::to_string(cfg.window) + "], got " + shape_string(x.shape()));
  }
  ad::Tape& tape = params.tape();

  ad::Var adjacency;
  ad::Var U;
  if (options.fixed_basis && !flags.no_gft) {
    if (options.fixed_basis->nodes() != cfg.nodes) throw DimensionError("network_forward: fixed basis size");
    adjacency = tape.constant(options.graph_override ? *options.graph_override : Tensor({cfg.nodes, cfg.nodes}));
    U = tape.constant(options.fixed_basis->U);
  } else {
    if (flags.no_latent_correlation) {
      if (!options.graph_override) {
        throw ConfigError("ablation without latent correlation needs an adjacency graph");
      }
      if (options.graph_override->shape() != Shape{cfg.nodes, cfg.nodes}) {
        throw DimensionError("network_forward: graph override " + shape_string(options.graph_override->shape()) +
                             " for " + std::to_string(cfg.nodes) + " nodes");
      }
      adjacency = tape.constant(*options.graph_override);
    } else {
      adjacency = correlation::latent_correlation(net.gru, net.attn, params, x);
    }
    if (flags.no_gft) {
      U = tape.constant(Tensor::identity(cfg.nodes));
    } else {
      U = spectral::eigh(spectral::normalized_laplacian(adjacency)).U;
    }
  }

  BlockOutput first = block_forward(net.block1, cfg, params, U, lift_channels(net.block1, params, x), flags);
  ad::Var backcast = first.backcast;
  ad::Var forecast_pre = first.forecast;
  if (!flags.no_residual) {
    ad::Var residual = x - first.backcast;
    BlockOutput second =
        block_forward(net.block2, cfg, params, U, lift_channels(net.block2, params, residual), flags);
    backcast = backcast + second.backcast;
    forecast_pre = forecast_pre + second.forecast;
  }

  const std::size_t d = cfg.nodes * cfg.horizon;
  ad::Var flat = ad::reshape(forecast_pre, {1, d});
  const OutputLayer& o = net.output;
  ad::Var gated = ad::glu(affine(params, o.value_weight, o.value_bias, flat),
                          affine(params, o.gate_weight, o.gate_bias, flat));
  ad::Var forecast = ad::reshape(affine(params, o.out_weight, o.out_bias, gated), {cfg.nodes, cfg.horizon});
  return {backcast, forecast, adjacency};
}

Prediction predict(const NetworkParams& net, const Tensor& x, const ForwardOptions& options) {
  ad::Tape tape;
  Binding params(tape, net.store, false);
  ForwardResult out = network_forward(net, params, tape.constant(x), options);
  return {out.backcast.value(), out.forecast.value(), out.adjacency.value()};
}

Tensor window_adjacency(const NetworkParams& net, const Tensor& x) {
  ad::Tape tape;
  Binding params(tape, net.store, false);
  return correlation::latent_correlation(net.gru, net.attn, params, tape.constant(x)).value();
}

ad::Var window_loss(const ForwardResult& out, ad::Var target, ad::Var input, bool use_backcast) {
  ad::Var loss = ad::sum_squares(out.forecast - target);
  if (use_backcast) loss = loss + ad::sum_squares(out.backcast - input);
  return loss;
}

}  // namespace stemgnn::model
