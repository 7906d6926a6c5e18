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

#ifndef STEMGNN_CORRELATION_HPP
#define STEMGNN_CORRELATION_HPP

#include <cstddef>
#include <string>

#include "stemgnn/autodiff.hpp"
#include "stemgnn/params.hpp"

namespace stemgnn::correlation {

/// Univariate GRU shared by all nodes. Gate weights are stored
/// [(input + hidden) x hidden] so that [x, h] * W is a plain row matmul.
struct GruParams {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;
  Slot w_z = 0, b_z = 0;
  Slot w_r = 0, b_r = 0;
  Slot w_h = 0, b_h = 0;
};

/// Query/key projections, each [hidden x dim].
struct AttentionParams {
  std::size_t dim = 0;
  Slot w_q = 0, w_k = 0;
};

GruParams add_gru(ParamStore& store, const std::string& prefix, std::size_t hidden, Rng& rng);
AttentionParams add_attention(ParamStore& store, const std::string& prefix, std::size_t hidden,
                              std::size_t dim, Rng& rng);

/// Runs the GRU over each node's K inputs from h0 = 0 and returns the final
/// hidden states stacked into R [N x hidden].
ad::Var gru_encode(const GruParams& gru, const Binding& params, ad::Var x);

/// Pre-symmetrisation attention: softmax_rows(Q K^T / sqrt(d)), Q = R W_Q, K = R W_K.
ad::Var attention_weights(const AttentionParams& attn, const Binding& params, ad::Var r);

/// Learned adjacency for one window X [N x K]: symmetrised attention over the
/// GRU encodings. Entries lie in (0, 1).
ad::Var latent_correlation(const GruParams& gru, const AttentionParams& attn, const Binding& params,
                           ad::Var x);

}  // namespace stemgnn::correlation

#endif  // STEMGNN_CORRELATION_HPP
