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

#include "stemgnn/correlation.hpp"

#include <cmath>

#include "stemgnn/errors.hpp"
#include "stemgnn/spectral.hpp"

namespace stemgnn::correlation {

GruParams add_gru(ParamStore& store, const std::string& prefix, std::size_t hidden, Rng& rng) {
  if (hidden == 0) throw ConfigError("GRU hidden size must be positive");
  GruParams g;
  g.hidden_dim = hidden;
  const std::size_t in = g.input_dim + hidden;
  g.w_z = store.add_uniform(prefix + "w_z", {in, hidden}, in, rng);
  g.b_z = store.add_uniform(prefix + "b_z", {hidden}, in, rng);
  g.w_r = store.add_uniform(prefix + "w_r", {in, hidden}, in, rng);
  g.b_r = store.add_uniform(prefix + "b_r", {hidden}, in, rng);
  g.w_h = store.add_uniform(prefix + "w_h", {in, hidden}, in, rng);
  g.b_h = store.add_uniform(prefix + "b_h", {hidden}, in, rng);
  return g;
}

AttentionParams add_attention(ParamStore& store, const std::string& prefix, std::size_t hidden,
                              std::size_t dim, Rng& rng) {
  if (dim == 0) throw ConfigError("attention dimension must be positive");
  AttentionParams a;
  a.dim = dim;
  a.w_q = store.add_uniform(prefix + "w_q", {hidden, dim}, hidden, rng);
  a.w_k = store.add_uniform(prefix + "w_k", {hidden, dim}, hidden, rng);
  return a;
}

ad::Var gru_encode(const GruParams& gru, const Binding& params, ad::Var x) {
  require_rank(x.value(), 2, "gru_encode");
  const std::size_t n = x.value().dim(0), k = x.value().dim(1);
  if (k == 0) throw DimensionError("gru_encode: window must hold at least one step");
  ad::Var h = params.tape().constant(Tensor({n, gru.hidden_dim}));
  for (std::size_t t = 0; t < k; ++t) {
    ad::Var xt = ad::slice_cols(x, t, t + 1);
    ad::Var xh = ad::concat_cols(xt, h);
    ad::Var z = ad::sigmoid(ad::add_row_bias(ad::matmul(xh, params[gru.w_z]), params[gru.b_z]));
    ad::Var r = ad::sigmoid(ad::add_row_bias(ad::matmul(xh, params[gru.w_r]), params[gru.b_r]));
    ad::Var xrh = ad::concat_cols(xt, r * h);
    ad::Var cand = ad::tanh(ad::add_row_bias(ad::matmul(xrh, params[gru.w_h]), params[gru.b_h]));
    // h' = (1 - z) h + z h~
    h = h + z * (cand - h);
  }
  return h;
}

ad::Var attention_weights(const AttentionParams& attn, const Binding& params, ad::Var r) {
  ad::Var q = ad::matmul(r, params[attn.w_q]);
  ad::Var key = ad::matmul(r, params[attn.w_k]);
  ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(key)), 1.0 / std::sqrt(static_cast<double>(attn.dim)));
  return ad::softmax_rows(scores);
}

ad::Var latent_correlation(const GruParams& gru, const AttentionParams& attn, const Binding& params,
                           ad::Var x) {
  return spectral::symmetrize(attention_weights(attn, params, gru_encode(gru, params, x)));
}

}  // namespace stemgnn::correlation
