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

#include "stemgnn/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "stemgnn/errors.hpp"
#include "stemgnn/random.hpp"

namespace stemgnn::model {

bool GradientAudit::passed(double tolerance) const {
  return std::all_of(groups.begin(), groups.end(), [&](const auto& g) { return g.second.relative() < tolerance; });
}

double GradientAudit::worst_relative_error() const {
  double worst = 0.0;
  for (const auto& [name, g] : groups) worst = std::max(worst, g.relative());
  return worst;
}

namespace {

struct Sample {
  Tensor input;
  Tensor target;
};

double mean_loss(const NetworkParams& net, const std::vector<Sample>& samples, const AblationFlags& flags) {
  ad::Tape tape;
  Binding params(tape, net.store, false);
  ForwardOptions opts;
  opts.ablation = flags;
  double total = 0.0;
  for (const auto& s : samples) {
    ad::Var x = tape.constant(s.input);
    ForwardResult out = network_forward(net, params, x, opts);
    total += window_loss(out, tape.constant(s.target), x, !flags.no_backcast).value()[0];
  }
  return total / static_cast<double>(samples.size());
}

std::vector<Tensor> analytic_gradient(const NetworkParams& net, const std::vector<Sample>& samples,
                                      const AblationFlags& flags) {
  ad::Tape tape;
  Binding params(tape, net.store);
  ForwardOptions opts;
  opts.ablation = flags;
  ad::Var total;
  for (const auto& s : samples) {
    ad::Var x = tape.constant(s.input);
    ForwardResult out = network_forward(net, params, x, opts);
    ad::Var l = window_loss(out, tape.constant(s.target), x, !flags.no_backcast);
    total = total.valid() ? total + l : l;
  }
  tape.backward(ad::scale(total, 1.0 / static_cast<double>(samples.size())));
  return params.gradients();
}

double window_gap(const NetworkParams& net, const Tensor& x) {
  const Tensor w = window_adjacency(net, x);
  return spectral::min_eigen_gap(spectral::jacobi_eigh(spectral::normalized_laplacian(w)).lambda);
}

}  // namespace

GradientAudit gradient_audit(const ModelConfig& config, std::uint64_t seed, const AuditOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  GradientAudit audit;
  NetworkParams net;
  std::vector<Sample> samples;
  for (std::size_t attempt = 0;; ++attempt) {
    if (attempt == options.max_attempts) {
      throw NumericError("gradient audit: no draw with eigen gap >= " + std::to_string(options.min_gap) + " in " +
                         std::to_string(options.max_attempts) + " attempts");
    }
    Rng rng = Rng::derived(seed, attempt);
    net = init_network(config, rng.next());
    for (Slot slot : {net.attn.w_q, net.attn.w_k})
      for (auto& v : net.store.tensor(slot).data()) v *= options.attention_scale;
    samples.clear();
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < options.windows; ++w) {
      Sample s{Tensor({config.nodes, config.window}), Tensor({config.nodes, config.horizon})};
      for (auto& v : s.input.data()) v = rng.uniform(-2.0, 2.0);
      for (auto& v : s.target.data()) v = rng.uniform(-2.0, 2.0);
      if (!options.ablation.no_gft && !options.ablation.no_latent_correlation) gap = std::min(gap, window_gap(net, s.input));
      samples.push_back(std::move(s));
    }
    audit.attempts = attempt + 1;
    audit.min_eigen_gap = gap;
    if (gap >= options.min_gap) break;
  }

  const std::vector<Tensor> analytic = analytic_gradient(net, samples, options.ablation);
  for (Slot s = 0; s < net.store.size(); ++s) {
    GradientAuditEntry entry;
    entry.name = net.store.name(s);
    entry.group = param_group(entry.name);
    entry.elements = net.store.tensor(s).size();
    Tensor& theta = net.store.tensor(s);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double x0 = theta[i];
      theta[i] = x0 + options.step;
      const double fp = mean_loss(net, samples, options.ablation);
      theta[i] = x0 - options.step;
      const double fm = mean_loss(net, samples, options.ablation);
      theta[i] = x0;
      const double numeric = (fp - fm) / (2.0 * options.step);
      const double a = analytic[s][i];
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(a - numeric));
      entry.scale = std::max({entry.scale, std::abs(a), std::abs(numeric)});
    }
    GroupError& g = audit.groups[entry.group];
    g.max_abs_error = std::max(g.max_abs_error, entry.max_abs_error);
    g.scale = std::max(g.scale, entry.scale);
    audit.params.push_back(std::move(entry));
  }
  audit.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return audit;
}

void write_audit_report(std::ostream& os, const GradientAudit& audit, double tolerance) {
  char buf[256];
  os << "parameter,group,elements,max_abs_error,scale,relative_error\n";
  for (const auto& e : audit.params) {
    const double rel = e.scale > 0.0 ? e.max_abs_error / e.scale : 0.0;
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.3e,%.3e,%.3e\n", e.name.c_str(), e.group.c_str(), e.elements,
                  e.max_abs_error, e.scale, rel);
    os << buf;
  }
  os << "\ngroup,max_relative_error,status\n";
  for (const auto& [name, g] : audit.groups) {
    std::snprintf(buf, sizeof buf, "%s,%.3e,%s\n", name.c_str(), g.relative(),
                  g.relative() < tolerance ? "ok" : "FAIL");
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "\nmin_eigen_gap=%.3e attempts=%zu seconds=%.2f tolerance=%.0e result=%s\n",
                audit.min_eigen_gap, audit.attempts, audit.seconds, tolerance,
                audit.passed(tolerance) ? "PASS" : "FAIL");
  os << buf;
}

}  // namespace stemgnn::model
