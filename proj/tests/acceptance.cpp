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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Artifacts go to ./acceptance_artifacts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stemgnn/cli.hpp"
#include "stemgnn/eval.hpp"
#include "stemgnn/gradcheck.hpp"
#include "stemgnn/io.hpp"
#include "stemgnn/spectral.hpp"
#include "stemgnn/training.hpp"

using namespace stemgnn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const fs::path kArtifacts = "acceptance_artifacts";

// ---- criterion 1 -----------------------------------------------------------

Outcome gradient_audit() {
  Outcome o;
  const auto t0 = Clock::now();
  model::ModelConfig cfg;
  cfg.nodes = 4;
  cfg.window = 8;
  cfg.channels = 4;
  cfg.basis = 8;
  cfg.attention_dim = 4;
  cfg.gru_hidden = 4;
  model::AuditOptions opts;
  opts.step = 1e-5;
  opts.min_gap = 1e-3;
  const model::GradientAudit audit = model::gradient_audit(cfg, 7, opts);
  const double secs = seconds_since(t0);
  for (const char* g : {"gru", "attention", "spe_seq", "graph_kernel", "basis", "fc"}) {
    const auto it = audit.groups.find(g);
    o.require(it != audit.groups.end(), std::string("group ") + g + " audited");
    if (it == audit.groups.end()) continue;
    o.require(it->second.relative() < 1e-4, std::string(g) + " relative error < 1e-4");
    o.require(it->second.scale > 0.0, std::string(g) + " has a nonzero gradient");
  }
  o.require(audit.min_eigen_gap >= 1e-3, "eigen gap >= 1e-3");
  o.require(secs < 60.0, "runtime < 60 s");
  o.note("worst relative error " + fmt("%.2e", audit.worst_relative_error()) + ", min gap " +
         fmt("%.2e", audit.min_eigen_gap) + ", draws " + std::to_string(audit.attempts) + ", " + fmt("%.1f s", secs));
  return o;
}

// ---- criterion 2 -----------------------------------------------------------

Outcome spectral_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2024);
  double round_trip = 0, fft = 0, parseval = 0, recon = 0, ortho = 0, lap_lo = 0, lap_hi = 0;
  for (std::size_t len = 4; len <= 64; ++len) {
    const Tensor x = oracle::random_tensor({3, len}, rng);
    const auto f = spectral::dft_dense(x);
    round_trip = std::max(round_trip, max_abs_diff(spectral::idft_dense(f), x));
    const double time = oracle::energy(x) * static_cast<double>(len);
    parseval = std::max(parseval, std::abs(oracle::energy(f.re) + oracle::energy(f.im) - time) / time);
  }
  for (std::size_t len = 1; len <= 256; len *= 2) {
    const Tensor x = oracle::random_tensor({3, len}, rng);
    const auto a = spectral::fft_radix2(x);
    const auto b = spectral::dft_dense(x);
    fft = std::max({fft, max_abs_diff(a.re, b.re), max_abs_diff(a.im, b.im)});
  }
  for (std::size_t n = 1; n <= 32; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      const Tensor a = oracle::random_symmetric(n, rng);
      const spectral::SpectralBasis b = spectral::jacobi_eigh(a);
      Tensor lam({n, n});
      for (std::size_t i = 0; i < n; ++i) lam.at(i, i) = b.lambda[i];
      recon = std::max(recon, max_abs_diff(oracle::triple_loop_matmul(oracle::triple_loop_matmul(b.U, lam), transpose(b.U)), a));
      ortho = std::max(ortho, max_abs_diff(oracle::triple_loop_matmul(transpose(b.U), b.U), Tensor::identity(n)));

      Tensor w({n, n});
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) w.at(i, j) = w.at(j, i) = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
      const spectral::SpectralBasis lb = spectral::jacobi_eigh(spectral::normalized_laplacian(w));
      lap_lo = std::min(lap_lo, lb.lambda[0]);
      lap_hi = std::max(lap_hi, lb.lambda[n - 1]);
    }
  }
  const double secs = seconds_since(t0);
  o.require(round_trip < 1e-10, "DFT/IDFT round trip < 1e-10");
  o.require(fft < 1e-9, "fft_radix2 matches dft_dense < 1e-9");
  o.require(parseval < 1e-8, "Parseval within 1e-8 relative");
  o.require(recon < 1e-8, "eigh reconstruction < 1e-8");
  o.require(ortho < 1e-8, "eigh orthonormality < 1e-8");
  o.require(lap_lo >= -1e-9 && lap_hi <= 2.0 + 1e-9, "Laplacian eigenvalues in [0, 2]");
  o.require(secs < 30.0, "runtime < 30 s");
  o.note("round trip " + fmt("%.1e", round_trip) + ", fft " + fmt("%.1e", fft) + ", Parseval " + fmt("%.1e", parseval) +
         ", reconstruction " + fmt("%.1e", recon) + ", orthonormality " + fmt("%.1e", ortho) + ", Laplacian range [" +
         fmt("%.1e", lap_lo) + ", " + fmt("%.6f", lap_hi) + "], " + fmt("%.1f s", secs));
  return o;
}

// ---- criterion 3 -----------------------------------------------------------

Outcome identity_equivalences() {
  Outcome o;
  Rng rng(3);

  model::ModelConfig cfg;
  cfg.nodes = 5;
  cfg.window = 8;
  cfg.channels = 3;
  cfg.basis = 6;
  cfg.attention_dim = 4;
  cfg.gru_hidden = 4;
  model::NetworkParams net = model::init_network(cfg, 11);
  Tensor w({5, 5});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) w.at(i, j) = w.at(j, i) = rng.uniform(0.1, 1.0);
  const spectral::SpectralBasis basis = spectral::jacobi_eigh(spectral::normalized_laplacian(w));
  const Tensor x = oracle::random_tensor({3, 5, 8}, rng);

  net.store.tensor(net.block1.graph_kernel.theta) = fixture::identity_filter(3, 5);
  double conv_err = 0.0;
  {
    ad::Tape tape;
    Binding b(tape, net.store, false);
    ad::Var u = tape.constant(basis.U);
    conv_err = max_abs_diff(model::spectral_graph_conv(u, net.block1.graph_kernel, b, spectral::gft(u, tape.constant(x))).value(), x);
  }
  fixture::make_identity_cell(net.store, net.block1.spe_seq, 3, 3);
  double cell_err = 0.0;
  {
    ad::Tape tape;
    Binding b(tape, net.store, false);
    cell_err = max_abs_diff(model::spe_seq_cell(net.block1.spe_seq, b, tape.constant(x)).value(), x);
  }

  model::ModelConfig one = cfg;
  one.nodes = 1;
  double gft_err = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const model::NetworkParams n1 = model::init_network(one, 100 + seed);
    const Tensor x1 = oracle::random_tensor({1, 8}, rng);
    model::ForwardOptions opts;
    opts.ablation.no_gft = true;
    const model::Prediction p = model::predict(n1, x1, opts);
    const fixture::SingleNodeOutput ref = fixture::hand_wired_single_node(n1, std::vector<double>(x1.values()));
    gft_err = std::max(gft_err, std::abs(p.forecast[0] - ref.forecast));
    for (std::size_t t = 0; t < 8; ++t) gft_err = std::max(gft_err, std::abs(p.backcast[t] - ref.backcast[t]));
  }
  o.require(conv_err < 1e-10, "identity filter graph conv < 1e-10");
  o.require(cell_err < 1e-6, "identity Spe-Seq cell < 1e-6");
  o.require(gft_err < 1e-8, "w/o GFT single node matches hand-wired pipeline < 1e-8");
  o.note("graph conv " + fmt("%.1e", conv_err) + ", Spe-Seq " + fmt("%.1e", cell_err) + ", w/o GFT N=1 " +
         fmt("%.1e", gft_err));
  return o;
}

// ---- criteria 4 and 5 ------------------------------------------------------

training::TrainConfig synthetic_config(std::uint64_t seed) {
  training::TrainConfig c;
  c.model.nodes = 8;
  c.model.window = 12;
  c.model.channels = 16;
  c.model.basis = 16;
  c.model.attention_dim = 16;
  c.model.gru_hidden = 16;
  c.epochs = 30;
  c.batch_size = 16;
  c.split_ratios = {0.6, 0.2, 0.2};
  c.seed = seed;
  return c;
}

io::SynthData synthetic_data(std::uint64_t seed) {
  io::SynthOptions o;
  o.kind = "graph-diffusion-sines";
  o.nodes = 8;
  o.length = 600;
  o.seed = seed;
  return io::synthesize(o);
}

struct SyntheticRun {
  std::uint64_t seed = 0;
  double full_mae = 0.0;
  double no_spe_seq_mae = 0.0;
  double repeat_last = 0.0;
  double moving_average = 0.0;
  double loss0 = 0.0;
  double loss10 = 0.0;
  bool same_data = false;
  double seconds = 0.0;
};

std::vector<SyntheticRun> synthetic_runs;

Outcome synthetic_end_to_end() {
  Outcome o;
  const auto t0 = Clock::now();
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto ts = Clock::now();
    const io::SynthData data = synthetic_data(seed);
    const training::TrainConfig cfg = synthetic_config(seed);
    const training::TrainResult r = training::train(data.dataset, cfg);
    const auto windows = eval::horizon_windows(r.data.splits.test, cfg.model.window, 1);
    const eval::ForecastReport rep = eval::evaluate(r.params, r.data, windows, 1);
    const auto base = eval::naive_baselines(data.dataset.values, windows, 1);
    SyntheticRun run;
    run.seed = seed;
    run.full_mae = rep.averaged.mae;
    run.repeat_last = base[0].averaged.mae;
    run.moving_average = base[1].averaged.mae;
    run.loss0 = r.log[0].train_loss;
    run.loss10 = r.log[10].train_loss;
    run.seconds = seconds_since(ts);
    synthetic_runs.push_back(run);
    o.require(run.full_mae < run.repeat_last && run.full_mae < run.moving_average,
              "seed " + std::to_string(seed) + " beats both baselines");
    o.require(run.loss10 < run.loss0, "seed " + std::to_string(seed) + " epoch-10 loss < epoch-0 loss");
    o.note("seed " + std::to_string(seed) + ": MAE " + fmt("%.4f", run.full_mae) + " vs repeat-last " +
           fmt("%.4f", run.repeat_last) + ", MA(3) " + fmt("%.4f", run.moving_average) + ", loss " +
           fmt("%.3f", run.loss0) + " -> " + fmt("%.3f", run.loss10) + ", " + fmt("%.0f s", run.seconds));
  }
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "runtime < 5 min");
  o.note(fmt("total %.0f s", secs));
  return o;
}

Outcome ablation_ordering() {
  Outcome o;
  const auto t0 = Clock::now();
  if (synthetic_runs.size() != 3) {
    o.require(false, "criterion 4 runs available");
    return o;
  }
  double full = 0.0, ablated = 0.0;
  for (SyntheticRun& run : synthetic_runs) {
    const io::SynthData data = synthetic_data(run.seed);
    training::TrainConfig cfg = synthetic_config(run.seed);
    cfg.ablation = model::variant_flags(model::Variant::kNoSpeSeq);
    const training::TrainResult r = training::train(data.dataset, cfg);
    const auto windows = eval::horizon_windows(r.data.splits.test, cfg.model.window, 1);
    model::ForwardOptions opts;
    opts.ablation = cfg.ablation;
    run.no_spe_seq_mae = eval::evaluate(r.params, r.data, windows, 1, opts).averaged.mae;
    // Both variants must see the same windows.
    const training::Trainer reference(data.dataset, synthetic_config(run.seed));
    run.same_data = reference.data_fingerprint() == r.data_fingerprint;
    o.require(run.same_data, "seed " + std::to_string(run.seed) + " identical training data");
    full += run.full_mae / 3.0;
    ablated += run.no_spe_seq_mae / 3.0;
  }
  o.require(full <= ablated, "3-seed mean full MAE <= w/o Spe-Seq Cell MAE");
  o.note("mean MAE StemGNN " + fmt("%.4f", full) + " vs w/o Spe-Seq Cell " + fmt("%.4f", ablated));

  // The ablate command emits all seven rows (short run: one seed, one epoch).
  const fs::path dir = kArtifacts / "ablate";
  fs::create_directories(dir);
  const io::SynthData data = synthetic_data(1);
  io::write_synth(data, (dir / "series.csv").string(), (dir / "adjacency.csv").string());
  std::ostringstream out, err;
  const int code = cli::run({"ablate", "--dataset", (dir / "series.csv").string(), "--adjacency",
                             (dir / "adjacency.csv").string(), "--out", dir.string(), "--seeds", "1", "--epochs", "1",
                             "--set", "window=12", "--set", "channels=4", "--set", "basis=4", "--set",
                             "attention_dim=4", "--set", "gru_hidden=4", "--set", "batch_size=32", "--set",
                             "split_train=0.6", "--set", "split_val=0.2", "--set", "split_test=0.2"},
                            out, err);
  o.require(code == 0, "ablate command exits 0");
  std::ifstream csv(dir / "ablation.csv");
  std::string line;
  std::getline(csv, line);
  std::vector<std::string> labels;
  while (std::getline(csv, line)) labels.push_back(line.substr(0, line.find(',')));
  const std::vector<std::string> expected = {"StemGNN", "w/o LC", "w/o Spe-Seq Cell", "w/o DFT",
                                             "w/o GFT", "w/o Residual", "w/o Backcasting"};
  o.require(labels == expected, "ablate CSV lists the seven variants in order");
  o.note("ablate rows " + std::to_string(labels.size()) + ", " + fmt("%.0f s", seconds_since(t0)));
  return o;
}

// ---- criterion 6 -----------------------------------------------------------

Outcome covid_scale() {
  Outcome o;
  const auto t0 = Clock::now();
  io::SynthOptions so;
  so.kind = "covid-like";
  so.nodes = 25;
  so.length = 110;
  so.seed = 1;
  const io::SynthData data = io::synthesize(so);

  training::TrainConfig cfg;
  cfg.model.nodes = 25;
  cfg.model.window = 14;
  cfg.model.channels = 8;
  cfg.model.basis = 8;
  cfg.model.attention_dim = 16;
  cfg.model.gru_hidden = 16;
  cfg.epochs = 40;
  cfg.batch_size = 8;
  cfg.split_ratios = {60.0 / 110.0, 0.0, 50.0 / 110.0};
  cfg.seed = 1;
  const training::TrainResult r = training::train(data.dataset, cfg);
  o.require(r.data.splits.train == training::IndexRange{0, 60}, "train range [0, 60)");
  o.require(r.data.splits.test == training::IndexRange{60, 110}, "test range [60, 110)");

  std::vector<eval::ForecastReport> reports;
  std::string summary;
  for (std::size_t h : {7, 14, 28}) {
    const auto windows = eval::horizon_windows(r.data.splits.test, cfg.model.window, h);
    eval::ForecastReport model_report = eval::evaluate(r.params, r.data, windows, h);
    const auto base = eval::naive_baselines(data.dataset.values, windows, h);
    summary += (summary.empty() ? "" : ", ") + std::string("H=") + std::to_string(h) + " MAPE " +
               fmt("%.1f%%", model_report.averaged.mape) + " (repeat-last " + fmt("%.1f%%", base[0].averaged.mape) + ")";
    if (h == 7) o.require(model_report.averaged.mape < base[0].averaged.mape, "H=7 MAPE beats repeat-last");
    reports.push_back(std::move(model_report));
    reports.insert(reports.end(), base.begin(), base.end());
  }
  const double secs = seconds_since(t0);
  o.require(secs < 180.0, "runtime < 3 min");

  fs::create_directories(kArtifacts);
  std::ofstream js(kArtifacts / "covid_report.json");
  eval::write_report_json(
      js, reports,
      R"j({"dataset": "covid-like synthetic fixture, 25 nodes x 110 days, train [0,60), test [60,110)",)j"
      R"j( "reference_mape_percent": {"H7": 15.5, "H14": 17.1, "H28": 19.3},)j"
      R"j( "reference_note": "published figures on the real 25-country series; non-binding context"})j");
  o.note(summary + "; reference 15.5/17.1/19.3% (non-binding); " + fmt("%.0f s", secs));
  return o;
}

// ---- criterion 7 -----------------------------------------------------------

std::vector<double> log_values(const std::vector<training::EpochLog>& log) {
  std::vector<double> v;
  for (const auto& e : log) v.insert(v.end(), {static_cast<double>(e.epoch), e.lr, e.train_loss, e.val_mae});
  return v;
}

Outcome determinism_and_persistence() {
  Outcome o;
  const auto t0 = Clock::now();
  io::SynthOptions so;
  so.nodes = 5;
  so.length = 200;
  so.seed = 4;
  const training::Dataset data = io::synthesize(so).dataset;
  training::TrainConfig cfg;
  cfg.model.nodes = 5;
  cfg.model.window = 8;
  cfg.model.channels = 4;
  cfg.model.basis = 8;
  cfg.model.attention_dim = 8;
  cfg.model.gru_hidden = 8;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.split_ratios = {0.6, 0.2, 0.2};
  cfg.seed = 5;

  const training::TrainResult a = training::train(data, cfg);
  const training::TrainResult b = training::train(data, cfg);
  o.require(log_values(a.log) == log_values(b.log), "identical logs");
  o.require(a.params.store == b.params.store && a.final_params.store == b.final_params.store, "identical parameters");

  const fs::path dir = kArtifacts / "persistence";
  fs::create_directories(dir);
  const std::string state_path = (dir / "state.txt").string();
  {
    training::Trainer first(data, cfg);
    first.run_epoch();
    first.run_epoch();
    io::save_train_state(first.state(), state_path);
  }
  training::Trainer resumed(data, cfg, io::load_train_state(state_path));
  resumed.run();
  o.require(resumed.state().params.store == a.final_params.store, "resumed final parameters equal the uninterrupted run");
  o.require(resumed.state().best.store == a.params.store, "resumed best parameters equal the uninterrupted run");
  o.require(log_values(resumed.state().log) == log_values(a.log), "resumed log equals the uninterrupted run");

  const std::string ckpt = (dir / "checkpoint.txt").string();
  io::save_checkpoint(a.params, ckpt);
  const model::NetworkParams loaded = io::load_checkpoint(ckpt, cfg.model);
  const Tensor x = training::window_input(a.data.normalized, a.data.test_windows.front());
  o.require(model::predict(loaded, x).forecast == model::predict(a.params, x).forecast,
            "checkpoint round trip is bit-exact");
  o.note(fmt("%.1f s", seconds_since(t0)));
  return o;
}

// ---- criterion 8 -----------------------------------------------------------

Outcome metric_oracle() {
  Outcome o;
  const std::vector<double> same = {1.5, -2.0, 4.0};
  o.require(eval::metric_mae(same, same) == 0.0 && eval::metric_rmse(same, same) == 0.0 &&
                eval::metric_mape(same, same).percent == 0.0,
            "perfect forecast scores zero");
  const std::vector<double> p1 = {1}, t1 = {2};
  o.require(eval::metric_mae(p1, t1) == 1.0 && eval::metric_rmse(p1, t1) == 1.0 &&
                eval::metric_mape(p1, t1).percent == 50.0,
            "pred [1], truth [2]");
  const std::vector<double> p2 = {0, 3}, t2 = {1, 1};
  o.require(eval::metric_mae(p2, t2) == 1.5, "MAE 1.5");
  o.require(eval::metric_rmse(p2, t2) == std::sqrt(2.5), "RMSE sqrt(2.5)");
  o.require(eval::metric_mape(p2, t2).percent == 150.0, "MAPE 150%");

  Rng rng(8);
  std::vector<Tensor> preds, truths;
  std::vector<std::size_t> starts;
  for (std::size_t w = 0; w < 6; ++w) {
    preds.push_back(oracle::random_tensor({4, 7}, rng, 1, 3));
    truths.push_back(oracle::random_tensor({4, 7}, rng, 1, 3));
    starts.push_back(w);
  }
  const eval::ForecastReport r = eval::make_report("m", 7, starts, preds, truths);
  double mae = 0, mape = 0, rmse = 0;
  for (const auto& s : r.per_step) mae += s.mae, mape += s.mape, rmse += s.rmse;
  o.require(r.averaged.mae == mae / 7 && r.averaged.mape == mape / 7 && r.averaged.rmse == rmse / 7,
            "averaged metrics equal the mean of per-step metrics");
  o.note("hand-computed fixtures exact, H-average exact");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient audit", gradient_audit},
      {2, "spectral kernel suite", spectral_suite},
      {3, "identity-configuration equivalences", identity_equivalences},
      {4, "synthetic end-to-end", synthetic_end_to_end},
      {5, "ablation ordering", ablation_ordering},
      {6, "COVID-scale run", covid_scale},
      {7, "determinism and persistence", determinism_and_persistence},
      {8, "metric oracle", metric_oracle},
  };
  fs::create_directories(kArtifacts);
  bool all = true;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    all = all && o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
