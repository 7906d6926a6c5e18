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

#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "stemgnn/errors.hpp"
#include "stemgnn/gradcheck.hpp"
#include "stemgnn/model.hpp"
#include "stemgnn/spectral.hpp"

using namespace stemgnn;
using namespace stemgnn::model;

using fixture::identity_filter;
using fixture::make_identity_cell;

namespace {

ModelConfig small_config(std::size_t n, std::size_t k, std::size_t c, std::size_t b) {
  ModelConfig cfg;
  cfg.nodes = n;
  cfg.window = k;
  cfg.channels = c;
  cfg.basis = b;
  cfg.attention_dim = 4;
  cfg.gru_hidden = 4;
  return cfg;
}

spectral::SpectralBasis random_basis(std::size_t n, Rng& rng) {
  Tensor w({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) w.at(i, j) = w.at(j, i) = rng.uniform(0.1, 1.0);
  return spectral::jacobi_eigh(spectral::normalized_laplacian(w));
}

Tensor cell_output(const NetworkParams& net, const Tensor& x) {
  ad::Tape tape;
  Binding b(tape, net.store, false);
  return spe_seq_cell(net.block1.spe_seq, b, tape.constant(x)).value();
}

Tensor graph_conv(const NetworkParams& net, const Tensor& u, const Tensor& x) {
  ad::Tape tape;
  Binding b(tape, net.store, false);
  return spectral_graph_conv(tape.constant(u), net.block1.graph_kernel, b, spectral::gft(tape.constant(u), tape.constant(x)))
      .value();
}

}  // namespace

TEST_CASE("glu examples") {
  ad::Tape tape;
  CHECK(max_abs(ad::glu(tape.constant(Tensor({3})), tape.constant(Tensor::vector({-4, 0, 9}))).value()) == 0.0);
  const Tensor v = Tensor::vector({-1.5, 0.25, 3});
  CHECK(max_abs_diff(ad::glu(tape.constant(v), tape.constant(Tensor::full({3}, 1e6))).value(), v) < 1e-9);
  CHECK(ad::glu(tape.constant(Tensor::vector({2})), tape.constant(Tensor::vector({0}))).value() == Tensor::vector({1.0}));
  CHECK_THROWS_AS(ad::glu(tape.constant(Tensor({2})), tape.constant(Tensor({3}))), DimensionError);
}

TEST_CASE("spe_seq_cell zero input gives zero output") {
  NetworkParams net = init_network(small_config(3, 8, 2, 4), 1);
  for (Slot s : {net.block1.spe_seq.real.value_bias, net.block1.spe_seq.imag.value_bias})
    net.store.tensor(s) = Tensor({2});
  CHECK(max_abs(cell_output(net, Tensor({2, 3, 8}))) == 0.0);
}

TEST_CASE("identity-configured spe_seq_cell is the identity") {
  NetworkParams net = init_network(small_config(3, 8, 2, 4), 2);
  make_identity_cell(net.store, net.block1.spe_seq, 2, 3);
  Rng rng(3);
  const Tensor x = oracle::random_tensor({2, 3, 8}, rng);
  CHECK(max_abs_diff(cell_output(net, x), x) < 1e-6);
}

TEST_CASE("spe_seq_cell gradient matches finite differences (C=2, N=3, K=8)") {
  const ModelConfig cfg = small_config(3, 8, 2, 4);
  NetworkParams net = init_network(cfg, 4);
  Rng rng(5);
  const Tensor x = oracle::random_tensor({2, 3, 8}, rng);
  const Tensor w = oracle::random_tensor({2, 3, 8}, rng);
  auto loss = [&](const ParamStore& store) {
    ad::Tape tape;
    Binding b(tape, store, false);
    return ad::sum(ad::hadamard(spe_seq_cell(net.block1.spe_seq, b, tape.constant(x)), tape.constant(w))).value()[0];
  };
  ad::Tape tape;
  Binding b(tape, net.store);
  tape.backward(ad::sum(ad::hadamard(spe_seq_cell(net.block1.spe_seq, b, tape.constant(x)), tape.constant(w))));
  const auto grads = b.gradients();
  for (const auto* part : {&net.block1.spe_seq.real, &net.block1.spe_seq.imag}) {
    for (Slot s : {part->value_kernel, part->value_bias, part->gate_kernel, part->gate_bias}) {
      auto f = [&](const Tensor& t) {
        ParamStore copy = net.store;
        copy.tensor(s) = t;
        return loss(copy);
      };
      const Tensor num = ad::finite_difference_gradient(f, net.store.tensor(s), 1e-6);
      CHECK_MESSAGE(max_abs_diff(grads[s], num) < 1e-5, net.store.name(s));
    }
  }
}

TEST_CASE("time-domain and tied-gate cell variants") {
  NetworkParams net = init_network(small_config(2, 6, 2, 4), 6);
  Rng rng(7);
  const Tensor x = oracle::random_tensor({2, 2, 6}, rng);
  ad::Tape tape;
  Binding b(tape, net.store, false);
  const auto& real = net.block1.spe_seq.real;
  const Tensor time = spe_seq_cell(net.block1.spe_seq, b, tape.constant(x), false).value();
  const Tensor value = ad::conv1d_same(tape.constant(x), b[real.value_kernel], b[real.value_bias]).value();
  const Tensor gate = ad::conv1d_same(tape.constant(x), b[real.gate_kernel], b[real.gate_bias]).value();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(time[i] - value[i] / (1 + std::exp(-gate[i]))) < 1e-15);
  const Tensor tied = spe_seq_cell(net.block1.spe_seq, b, tape.constant(x), false, true).value();
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(tied[i] - value[i] / (1 + std::exp(-value[i]))) < 1e-15);
}

TEST_CASE("spectral_graph_conv examples") {
  Rng rng(8);
  const spectral::SpectralBasis basis = random_basis(4, rng);

  NetworkParams one = init_network(small_config(4, 5, 1, 4), 9);
  one.store.tensor(one.block1.graph_kernel.theta) = Tensor::full({1, 1, 4}, 1.0);
  const Tensor x1 = oracle::random_tensor({1, 4, 5}, rng);
  CHECK(max_abs_diff(graph_conv(one, basis.U, x1), x1) < 1e-10);
  one.store.tensor(one.block1.graph_kernel.theta) = Tensor({1, 1, 4});
  CHECK(max_abs(graph_conv(one, basis.U, x1)) == 0.0);

  // C_in = 2, C_out = 1: the block kernel is square, so wire the sum by hand.
  NetworkParams two = init_network(small_config(4, 5, 2, 4), 10);
  const Tensor x2 = oracle::random_tensor({2, 4, 5}, rng);
  ad::Tape tape;
  Binding b(tape, two.store, false);
  ad::Var theta = tape.constant(Tensor::full({2, 1, 4}, 1.0));
  ad::Var u = tape.constant(basis.U);
  const Tensor z = spectral::igft(u, ad::spectral_mix(theta, spectral::gft(u, tape.constant(x2)))).value();
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(z.at(0, n, k) - (x2.at(0, n, k) + x2.at(1, n, k))) < 1e-10);

  two.store.tensor(two.block1.graph_kernel.theta) = identity_filter(2, 4);
  CHECK(max_abs_diff(graph_conv(two, basis.U, x2), x2) < 1e-10);
  CHECK_THROWS_AS(graph_conv(two, Tensor::identity(3), x2), DimensionError);
}

TEST_CASE("block identity fixture reproduces the input as backcast") {
  const std::size_t n = 3, k = 4;
  ModelConfig cfg = small_config(n, k, 1, n * k);
  NetworkParams net = init_network(cfg, 11);
  BlockParams& p = net.block1;
  make_identity_cell(net.store, p.spe_seq, 1, 3);
  net.store.tensor(p.graph_kernel.theta) = identity_filter(1, n);
  net.store.tensor(p.backcast.coeff_weight) = Tensor::identity(n * k);
  net.store.tensor(p.backcast.coeff_bias) = Tensor({n * k});
  net.store.tensor(p.backcast.basis) = Tensor::identity(n * k);
  Rng rng(12);
  const spectral::SpectralBasis basis = random_basis(n, rng);
  const Tensor x = oracle::random_tensor({1, n, k}, rng);
  ad::Tape tape;
  Binding b(tape, net.store, false);
  const BlockOutput out = block_forward(p, cfg, b, tape.constant(basis.U), tape.constant(x));
  CHECK(max_abs_diff(out.backcast.value(), x.reshaped({n, k})) < 1e-6);
}

TEST_CASE("block with zero input and zero biases forecasts zero") {
  ModelConfig cfg = small_config(3, 6, 2, 5);
  NetworkParams net = init_network(cfg, 13);
  for (Slot s = 0; s < net.store.size(); ++s) {
    const std::string& name = net.store.name(s);
    if (name.find("bias") != std::string::npos) net.store.tensor(s) = Tensor(net.store.tensor(s).shape());
  }
  Rng rng(14);
  const spectral::SpectralBasis basis = random_basis(3, rng);
  ad::Tape tape;
  Binding b(tape, net.store, false);
  const BlockOutput out = block_forward(net.block1, cfg, b, tape.constant(basis.U), tape.constant(Tensor({2, 3, 6})));
  CHECK(max_abs(out.forecast.value()) == 0.0);
  CHECK(max_abs(out.backcast.value()) == 0.0);
}

TEST_CASE("block output shapes") {
  ModelConfig cfg = small_config(5, 12, 4, 16);
  NetworkParams net = init_network(cfg, 15);
  Rng rng(16);
  const spectral::SpectralBasis basis = random_basis(5, rng);
  ad::Tape tape;
  Binding b(tape, net.store, false);
  const BlockOutput out =
      block_forward(net.block1, cfg, b, tape.constant(basis.U), tape.constant(oracle::random_tensor({4, 5, 12}, rng)));
  CHECK(out.backcast.shape() == Shape{5, 12});
  CHECK(out.forecast.shape() == Shape{5, 1});
  CHECK(net.store.tensor(net.block1.forecast.basis).shape() == Shape{5, 16});
  CHECK(net.store.tensor(net.block1.backcast.basis).shape() == Shape{60, 16});
  CHECK(net.store.tensor(net.block1.graph_kernel.theta).dim(2) == 5);
}

TEST_CASE("w/o GFT on one node matches a hand-wired single-node pipeline") {
  ModelConfig cfg = small_config(1, 8, 3, 5);
  const NetworkParams net = init_network(cfg, 17);
  Rng rng(18);
  const Tensor x = oracle::random_tensor({1, 8}, rng);
  ForwardOptions opts;
  opts.ablation.no_gft = true;
  const Prediction pred = predict(net, x, opts);

  const fixture::SingleNodeOutput ref = fixture::hand_wired_single_node(net, std::vector<double>(x.values()));
  CHECK(std::abs(pred.forecast[0] - ref.forecast) < 1e-8);
  for (std::size_t t = 0; t < 8; ++t) CHECK(std::abs(pred.backcast[t] - ref.backcast[t]) < 1e-8);
  CHECK(pred.adjacency == Tensor::matrix({{1}}));
}

TEST_CASE("w/o Residual ignores block 2") {
  ModelConfig cfg = small_config(4, 8, 3, 6);
  const NetworkParams net = init_network(cfg, 19);
  NetworkParams other = net;
  const NetworkParams donor = init_network(cfg, 99);
  for (Slot s = 0; s < net.store.size(); ++s)
    if (net.store.name(s).rfind("block2.", 0) == 0) other.store.tensor(s) = donor.store.tensor(s);
  Rng rng(20);
  const Tensor x = oracle::random_tensor({4, 8}, rng);
  ForwardOptions opts;
  opts.ablation.no_residual = true;
  const Prediction a = predict(net, x, opts), b = predict(other, x, opts);
  CHECK(a.forecast == b.forecast);
  CHECK(a.backcast == b.backcast);
  CHECK_FALSE(predict(net, x).forecast == predict(other, x).forecast);
}

TEST_CASE("full forward is finite with symmetric W") {
  const NetworkParams net = init_network(small_config(4, 8, 4, 8), 21);
  Rng rng(22);
  const Prediction p = predict(net, oracle::random_tensor({4, 8}, rng));
  CHECK(p.forecast.all_finite());
  CHECK(p.backcast.all_finite());
  CHECK(p.forecast.shape() == Shape{4, 1});
  CHECK(oracle::max_asymmetry(p.adjacency) == 0.0);
}

TEST_CASE("toggling a flag twice gives bit-identical outputs") {
  const NetworkParams net = init_network(small_config(4, 8, 4, 8), 23);
  Rng rng(24);
  const Tensor x = oracle::random_tensor({4, 8}, rng);
  const Prediction base = predict(net, x);
  ForwardOptions opts;
  opts.ablation.no_spe_seq = true;
  opts.ablation.no_dft = true;
  (void)predict(net, x, opts);
  opts.ablation.no_spe_seq = false;
  opts.ablation.no_dft = false;
  const Prediction again = predict(net, x, opts);
  CHECK(base.forecast == again.forecast);
  CHECK(base.backcast == again.backcast);
  CHECK(base.adjacency == again.adjacency);
}

TEST_CASE("outputs stay finite over 1000 random trials") {
  const ModelConfig cfg = small_config(4, 8, 2, 4);
  std::size_t finite = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    const NetworkParams net = init_network(cfg, trial);
    Rng rng = Rng::derived(trial, 1);
    const double spread = trial % 3 == 0 ? 100.0 : 3.0;
    const Prediction p = predict(net, oracle::random_tensor({4, 8}, rng, -spread, spread));
    finite += p.forecast.all_finite() && p.backcast.all_finite() && p.adjacency.all_finite();
  }
  CHECK(finite == 1000);
}

TEST_CASE("identity-filter fixture is node-permutation equivariant") {
  const std::size_t n = 4, k = 6, c = 1;
  ModelConfig cfg = small_config(n, k, c, n * k);
  NetworkParams net = init_network(cfg, 25);
  // Basis heads and output layer act node-wise and identically on each node.
  Tensor pick({n, n * k});
  for (std::size_t i = 0; i < n; ++i) pick.at(i, i * k + k - 1) = 1.0;
  for (BlockParams* p : {&net.block1, &net.block2}) {
    net.store.tensor(p->graph_kernel.theta) = identity_filter(c, n);
    for (BasisHead* h : {&p->backcast, &p->forecast}) {
      net.store.tensor(h->coeff_weight) = Tensor::identity(n * k);
      net.store.tensor(h->coeff_bias) = Tensor({n * k});
    }
    net.store.tensor(p->backcast.basis) = scale(Tensor::identity(n * k), 0.5);
    net.store.tensor(p->forecast.basis) = pick;
  }
  const OutputLayer& o = net.output;
  net.store.tensor(o.value_weight) = Tensor::identity(n);
  net.store.tensor(o.gate_weight) = scale(Tensor::identity(n), 0.3);
  net.store.tensor(o.out_weight) = Tensor::identity(n);
  for (Slot s : {o.value_bias, o.gate_bias, o.out_bias}) net.store.tensor(s) = Tensor::full({n}, 0.1);

  Rng rng(26);
  const Tensor x = oracle::random_tensor({n, k}, rng);
  const std::vector<std::size_t> perm = {3, 1, 0, 2};
  Tensor px({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < k; ++t) px.at(i, t) = x.at(perm[i], t);
  const Prediction a = predict(net, x), b = predict(net, px);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(b.forecast[i] - a.forecast[perm[i]]) < 1e-10);
    for (std::size_t t = 0; t < k; ++t) CHECK(std::abs(b.backcast.at(i, t) - a.backcast.at(perm[i], t)) < 1e-10);
  }
}

TEST_CASE("w/o LC requires a correctly shaped graph") {
  const NetworkParams net = init_network(small_config(3, 5, 2, 4), 27);
  ForwardOptions opts;
  opts.ablation.no_latent_correlation = true;
  CHECK_THROWS_AS(predict(net, Tensor({3, 5}), opts), ConfigError);
  const Tensor bad({2, 2});
  opts.graph_override = &bad;
  CHECK_THROWS_AS(predict(net, Tensor({3, 5}), opts), DimensionError);
  const Tensor good = Tensor::matrix({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  opts.graph_override = &good;
  CHECK(predict(net, Tensor({3, 5}), opts).adjacency == good);
  CHECK_THROWS_AS(predict(net, Tensor({3, 4})), DimensionError);
}

TEST_CASE("config validation and parameter groups") {
  ModelConfig cfg = small_config(3, 5, 2, 4);
  cfg.kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.kernel = 3;
  cfg.nodes = 0;
  CHECK_THROWS_AS(init_network(cfg, 1), ConfigError);

  const NetworkParams net = init_network(small_config(3, 5, 2, 4), 1);
  std::map<std::string, std::size_t> counts;
  for (Slot s = 0; s < net.store.size(); ++s) ++counts[param_group(net.store.name(s))];
  CHECK(counts.size() == 6);
  CHECK(counts["gru"] == 6);
  CHECK(counts["attention"] == 2);
  CHECK(counts["spe_seq"] == 16);
  CHECK(counts["graph_kernel"] == 2);
  CHECK(counts["basis"] == 4);
  CHECK(counts["fc"] > 0);
  CHECK(init_network(small_config(3, 5, 2, 4), 1).store == net.store);
}

TEST_CASE("variant labels") {
  const std::vector<std::string> expected = {"StemGNN", "w/o LC", "w/o Spe-Seq Cell", "w/o DFT",
                                             "w/o GFT", "w/o Residual", "w/o Backcasting"};
  for (std::size_t i = 0; i < kAllVariants.size(); ++i) CHECK(variant_label(kAllVariants[i]) == expected[i]);
  CHECK(variant_flags(Variant::kFull) == AblationFlags{});
}

TEST_CASE("full tiny-model gradient audit, relative error below 1e-5") {
  ModelConfig cfg = small_config(4, 8, 4, 8);
  const GradientAudit audit = gradient_audit(cfg, 3);
  CHECK(audit.groups.size() == 6);
  for (const auto& [group, err] : audit.groups) CHECK_MESSAGE(err.relative() < 1e-5, group);
  CHECK(audit.min_eigen_gap >= 1e-3);
}
