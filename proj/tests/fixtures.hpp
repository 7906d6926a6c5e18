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

#ifndef STEMGNN_TESTS_FIXTURES_HPP
#define STEMGNN_TESTS_FIXTURES_HPP

// Model fixtures shared by the unit tests and the acceptance runner.

#include <cmath>
#include <vector>

#include "stemgnn/model.hpp"

namespace fixture {

using namespace stemgnn;

inline Tensor delta_kernels(std::size_t c, std::size_t tau) {
  Tensor k({c, c, tau});
  for (std::size_t i = 0; i < c; ++i) k.at(i, i, (tau - 1) / 2) = 1.0;
  return k;
}

// Value convs pass the input through, gates saturate at +1e6.
inline void make_identity_cell(ParamStore& s, const model::SpeSeqParams& p, std::size_t c, std::size_t tau) {
  for (const auto* part : {&p.real, &p.imag}) {
    s.tensor(part->value_kernel) = delta_kernels(c, tau);
    s.tensor(part->value_bias) = Tensor({c});
    s.tensor(part->gate_kernel) = Tensor({c, c, tau});
    s.tensor(part->gate_bias) = Tensor::full({c}, 1e6);
  }
}

// theta[i, j, :] = 1 if i == j.
inline Tensor identity_filter(std::size_t c, std::size_t n) {
  Tensor t({c, c, n});
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t m = 0; m < n; ++m) t.at(i, i, m) = 1.0;
  return t;
}

struct SingleNodeOutput {
  double forecast = 0.0;
  std::vector<double> backcast;
};

// One-node network written out with scalar loops: lift, Spe-Seq cell,
// channel mixing by theta[:, :, 0], basis heads, residual block, output GLU.
// Only the Spe-Seq cell is delegated to the library.
inline SingleNodeOutput hand_wired_single_node(const model::NetworkParams& net, const std::vector<double>& x) {
  const ParamStore& s = net.store;
  const std::size_t c = net.config.channels, k = net.config.window, nb = net.config.basis;
  auto block = [&](const model::BlockParams& p, const std::vector<double>& in, std::vector<double>& backcast,
                   double& forecast) {
    Tensor lifted({c, 1, k});
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t t = 0; t < k; ++t)
        lifted.at(ch, 0, t) = in[t] * s.tensor(p.lift_weight).at(0, ch) + s.tensor(p.lift_bias)[ch];
    ad::Tape tape;
    Binding b(tape, s, false);
    const Tensor cell = model::spe_seq_cell(p.spe_seq, b, tape.constant(lifted), true, net.config.tied_gate).value();
    std::vector<double> z(c * k, 0.0);
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t t = 0; t < k; ++t) z[j * k + t] += s.tensor(p.graph_kernel.theta).at(i, j, 0) * cell.at(i, 0, t);
    auto head = [&](const model::BasisHead& h, std::size_t rows) {
      const Tensor& w = s.tensor(h.coeff_weight);
      const Tensor& v = s.tensor(h.basis);
      std::vector<double> coeff(nb);
      for (std::size_t q = 0; q < nb; ++q) {
        coeff[q] = s.tensor(h.coeff_bias)[q];
        for (std::size_t e = 0; e < c * k; ++e) coeff[q] += z[e] * w.at(e, q);
      }
      std::vector<double> out(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t q = 0; q < nb; ++q) out[r] += v.at(r, q) * coeff[q];
      return out;
    };
    backcast = head(p.backcast, k);
    forecast = head(p.forecast, 1)[0];
  };

  std::vector<double> back1, back2;
  double f1 = 0.0, f2 = 0.0;
  block(net.block1, x, back1, f1);
  std::vector<double> residual(k);
  for (std::size_t t = 0; t < k; ++t) residual[t] = x[t] - back1[t];
  block(net.block2, residual, back2, f2);
  const double pre = f1 + f2;
  const model::OutputLayer& o = net.output;
  const double value = pre * s.tensor(o.value_weight)[0] + s.tensor(o.value_bias)[0];
  const double gate = pre * s.tensor(o.gate_weight)[0] + s.tensor(o.gate_bias)[0];
  SingleNodeOutput out;
  out.forecast = value / (1 + std::exp(-gate)) * s.tensor(o.out_weight)[0] + s.tensor(o.out_bias)[0];
  for (std::size_t t = 0; t < k; ++t) out.backcast.push_back(back1[t] + back2[t]);
  return out;
}

}  // namespace fixture

#endif  // STEMGNN_TESTS_FIXTURES_HPP
