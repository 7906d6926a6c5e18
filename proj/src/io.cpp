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

#include "stemgnn/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "stemgnn/errors.hpp"
#include "stemgnn/random.hpp"

namespace stemgnn::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size() && errno != ERANGE;
}

bool parse_size(const std::string& text, std::size_t& out) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (errno == ERANGE) return false;
  out = static_cast<std::size_t>(v);
  return true;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const std::string& path, bool integrity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const std::string msg = "cannot open '" + path + "'";
    if (integrity) throw IntegrityError(msg);
    throw DataError(msg);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("write to '" + path + "' failed");
}

}  // namespace

// ---- datasets --------------------------------------------------------------

training::Dataset parse_csv(std::istream& in, const std::string& source) {
  training::Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (ds.node_names.empty()) {
      ds.node_names = cells;
      continue;
    }
    if (cells.size() != ds.node_names.size()) {
      throw DataError(source + ": ragged row at line " + std::to_string(line_no) + " (" + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(ds.node_names.size()) + ")");
    }
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!parse_double(cells[j], row[j])) {
        throw DataError(source + ": non-numeric cell '" + cells[j] + "' at line " + std::to_string(line_no) +
                        ", column " + std::to_string(j + 1));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) {
    throw DataError(source + ": fewer than 2 data rows (found " + std::to_string(rows.size()) + ")");
  }
  const std::size_t n = ds.node_names.size(), t = rows.size();
  ds.values = Tensor({n, t});
  for (std::size_t s = 0; s < t; ++s)
    for (std::size_t i = 0; i < n; ++i) ds.values.at(i, s) = rows[s][i];
  return ds;
}

training::Dataset load_csv(const std::string& path) {
  std::istringstream in(read_file(path, false));
  return parse_csv(in, path);
}

void write_dataset_csv(std::ostream& os, const training::Dataset& dataset) {
  for (std::size_t i = 0; i < dataset.nodes(); ++i) os << (i ? "," : "") << dataset.node_names[i];
  os << '\n';
  for (std::size_t s = 0; s < dataset.length(); ++s) {
    for (std::size_t i = 0; i < dataset.nodes(); ++i) os << (i ? "," : "") << fmt17(dataset.values.at(i, s));
    os << '\n';
  }
}

Tensor load_adjacency(const std::string& path) {
  std::istringstream in(read_file(path, false));
  std::string line;
  std::size_t line_no = 0, n = 0, row = 0;
  Tensor w;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (n == 0) {
      if (cells.size() < 2) throw DataError(path + ": adjacency header needs at least one node");
      n = cells.size() - 1;
      w = Tensor({n, n});
      continue;
    }
    if (cells.size() != n + 1) throw DataError(path + ": ragged adjacency row at line " + std::to_string(line_no));
    if (row == n) throw DataError(path + ": more than " + std::to_string(n) + " adjacency rows");
    for (std::size_t j = 0; j < n; ++j) {
      if (!parse_double(cells[j + 1], w.at(row, j))) {
        throw DataError(path + ": non-numeric adjacency cell at line " + std::to_string(line_no));
      }
    }
    ++row;
  }
  if (n == 0 || row != n) throw DataError(path + ": adjacency must be square");
  return w;
}

// ---- synthetic data --------------------------------------------------------

namespace {

// Random spanning tree plus extra edges; symmetric, zero diagonal.
Tensor random_connected_graph(std::size_t n, Rng& rng) {
  Tensor w({n, n});
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = rng.below(i);
    w.at(i, j) = w.at(j, i) = rng.uniform(0.5, 1.0);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (w.at(i, j) == 0.0 && rng.uniform() < 0.25) w.at(i, j) = w.at(j, i) = rng.uniform(0.1, 1.0);
  return w;
}

// (I + D^-1 W) applied to the rows of `base`.
Tensor diffuse_one_hop(const Tensor& w, const Tensor& base) {
  const std::size_t n = w.dim(0), t = base.dim(1);
  Tensor out = base;
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += w.at(i, j);
    if (deg <= 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (w.at(i, j) == 0.0) continue;
      const double a = w.at(i, j) / deg;
      for (std::size_t s = 0; s < t; ++s) out.at(i, s) += a * base.at(j, s);
    }
  }
  return out;
}

std::vector<std::string> default_names(std::size_t n, const char* prefix) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

SynthData diffusion_sines(const SynthOptions& o) {
  Rng rng(o.seed);
  SynthData d;
  d.adjacency = random_connected_graph(o.nodes, rng);
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> weight;
  for (std::size_t k = 0; k < o.sinusoids; ++k) {
    // Integer periods keep noiseless series exactly periodic.
    d.periods.push_back(k == 0 ? 12 + rng.below(13) : 30 + rng.below(21));
    weight.push_back(k == 0 ? 1.0 : rng.uniform(0.4, 0.8));
  }
  Tensor base({o.nodes, o.length});
  for (std::size_t i = 0; i < o.nodes; ++i) {
    const double phase = rng.uniform(0.0, two_pi);
    const double amp = rng.uniform(0.5, 1.5);
    for (std::size_t s = 0; s < o.length; ++s) {
      double v = 0.0;
      for (std::size_t k = 0; k < o.sinusoids; ++k)
        v += weight[k] * std::sin(two_pi * static_cast<double>(s) / static_cast<double>(d.periods[k]) + phase);
      base.at(i, s) = amp * v;
    }
  }
  Tensor clean = diffuse_one_hop(d.adjacency, base);
  for (std::size_t i = 0; i < o.nodes; ++i) {
    double amplitude = 0.0;
    for (std::size_t s = 0; s < o.length; ++s) amplitude = std::max(amplitude, std::abs(clean.at(i, s)));
    const double sigma = o.noise_fraction * amplitude;
    for (std::size_t s = 0; s < o.length; ++s) clean.at(i, s) += sigma > 0.0 ? sigma * rng.normal() : 0.0;
  }
  d.dataset.values = std::move(clean);
  d.dataset.node_names = default_names(o.nodes, "node");
  d.dataset.granularity = "step";
  return d;
}

// Daily counts: recurring infection waves (35-55 day period) per node, mixed
// over a contact graph, weekly reporting cycle, multiplicative noise.
// Strictly positive.
SynthData covid_like(const SynthOptions& o) {
  Rng rng(o.seed);
  SynthData d;
  d.adjacency = random_connected_graph(o.nodes, rng);
  const double two_pi = 2.0 * std::numbers::pi;
  Tensor wave({o.nodes, o.length});
  for (std::size_t i = 0; i < o.nodes; ++i) {
    const double scale = std::exp(rng.uniform(std::log(200.0), std::log(3000.0)));
    const double period = rng.uniform(35.0, 55.0);
    const double depth = rng.uniform(0.5, 1.0);
    const double phase = rng.uniform(0.0, two_pi);
    for (std::size_t s = 0; s < o.length; ++s)
      wave.at(i, s) = scale * std::exp(depth * std::sin(two_pi * static_cast<double>(s) / period + phase));
  }
  Tensor mixed = diffuse_one_hop(d.adjacency, wave);
  for (std::size_t i = 0; i < o.nodes; ++i) {
    const double weekly = rng.uniform(0.15, 0.3);
    const double phase = two_pi * static_cast<double>(rng.below(7)) / 7.0;
    for (std::size_t s = 0; s < o.length; ++s) {
      const double season = 1.0 + weekly * std::sin(two_pi * static_cast<double>(s) / 7.0 + phase);
      const double noise = 1.0 + o.noise_fraction * rng.normal();
      mixed.at(i, s) = std::max(1.0, std::round(mixed.at(i, s) * season * noise));
    }
  }
  d.dataset.values = std::move(mixed);
  d.dataset.node_names = default_names(o.nodes, "region");
  d.dataset.granularity = "day";
  d.periods = {7};
  return d;
}

}  // namespace

SynthData synthesize(const SynthOptions& o) {
  if (o.nodes < 2 || o.length < 100) throw ConfigError("synth needs N >= 2 and T >= 100");
  if (o.kind == "graph-diffusion-sines") {
    if (o.sinusoids == 0 || o.sinusoids > 2) throw ConfigError("graph-diffusion-sines supports 1 or 2 sinusoids");
    return diffusion_sines(o);
  }
  if (o.kind == "covid-like") return covid_like(o);
  throw ConfigError("unknown synth kind '" + o.kind + "' (expected graph-diffusion-sines or covid-like)");
}

void write_synth(const SynthData& data, const std::string& series_path, const std::string& adjacency_path) {
  std::ostringstream series;
  write_dataset_csv(series, data.dataset);
  write_file(series_path, series.str());
  std::ostringstream adj;
  adj << "node";
  for (const auto& name : data.dataset.node_names) adj << ',' << name;
  adj << '\n';
  for (std::size_t i = 0; i < data.adjacency.dim(0); ++i) {
    adj << data.dataset.node_names[i];
    for (std::size_t j = 0; j < data.adjacency.dim(1); ++j) adj << ',' << fmt17(data.adjacency.at(i, j));
    adj << '\n';
  }
  write_file(adjacency_path, adj.str());
}

// ---- run configuration -----------------------------------------------------

namespace {

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::size_t as_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  if (!parse_size(v, out)) throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out)) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

#define SIZE_FIELD(KEY, MEMBER)                                                   \
  Field {                                                                         \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },             \
        [](RunConfig& c, const std::string& v) { c.MEMBER = as_size(KEY, v); } \
  }
#define DOUBLE_FIELD(KEY, MEMBER)                                                   \
  Field {                                                                           \
    KEY, [](const RunConfig& c) { return fmt17(c.MEMBER); },                        \
        [](RunConfig& c, const std::string& v) { c.MEMBER = as_double(KEY, v); } \
  }
#define BOOL_FIELD(KEY, MEMBER)                                                   \
  Field {                                                                         \
    KEY, [](const RunConfig& c) { return from_bool(c.MEMBER); },                  \
        [](RunConfig& c, const std::string& v) { c.MEMBER = as_bool(KEY, v); } \
  }
#define STRING_FIELD(KEY, MEMBER)                                        \
  Field {                                                                \
    KEY, [](const RunConfig& c) { return c.MEMBER; },                    \
        [](RunConfig& c, const std::string& v) { c.MEMBER = v; }         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      STRING_FIELD("dataset", dataset),
      STRING_FIELD("adjacency", adjacency),
      STRING_FIELD("output_dir", output_dir),
      SIZE_FIELD("horizon", horizon),
      BOOL_FIELD("freeze_adjacency", freeze_adjacency),
      SIZE_FIELD("nodes", train.model.nodes),
      SIZE_FIELD("window", train.model.window),
      SIZE_FIELD("model_horizon", train.model.horizon),
      SIZE_FIELD("channels", train.model.channels),
      SIZE_FIELD("basis", train.model.basis),
      SIZE_FIELD("attention_dim", train.model.attention_dim),
      SIZE_FIELD("gru_hidden", train.model.gru_hidden),
      SIZE_FIELD("kernel", train.model.kernel),
      BOOL_FIELD("tied_gate", train.model.tied_gate),
      SIZE_FIELD("epochs", train.epochs),
      SIZE_FIELD("batch_size", train.batch_size),
      DOUBLE_FIELD("learning_rate", train.learning_rate),
      DOUBLE_FIELD("decay_rate", train.decay_rate),
      SIZE_FIELD("decay_every", train.decay_every),
      DOUBLE_FIELD("rho", train.rho),
      DOUBLE_FIELD("epsilon", train.epsilon),
      DOUBLE_FIELD("split_train", train.split_ratios[0]),
      DOUBLE_FIELD("split_val", train.split_ratios[1]),
      DOUBLE_FIELD("split_test", train.split_ratios[2]),
      SIZE_FIELD("seed", train.seed),
      Field{"normalization", [](const RunConfig& c) { return training::norm_kind_name(c.train.norm); },
            [](RunConfig& c, const std::string& v) { c.train.norm = training::parse_norm_kind(v); }},
      BOOL_FIELD("freeze_graph", train.freeze_graph),
      BOOL_FIELD("ablate_latent_correlation", train.ablation.no_latent_correlation),
      BOOL_FIELD("ablate_spe_seq", train.ablation.no_spe_seq),
      BOOL_FIELD("ablate_dft", train.ablation.no_dft),
      BOOL_FIELD("ablate_gft", train.ablation.no_gft),
      BOOL_FIELD("ablate_residual", train.ablation.no_residual),
      BOOL_FIELD("ablate_backcast", train.ablation.no_backcast),
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

}  // namespace

bool operator==(const RunConfig& a, const RunConfig& b) {
  for (const auto& f : fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_config_value(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  const std::string text = [&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }();
  return parse_config(text);
}

void save_config(const RunConfig& config, const std::string& path) { write_file(path, serialize_config(config)); }

// ---- checkpoints -----------------------------------------------------------

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_fingerprint(const RunConfig& config) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize_config(config))));
  return buf;
}

void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  std::string body;
  for (const auto& t : tensors) {
    body += t.name + " " + std::to_string(t.value.rank());
    for (std::size_t d : t.value.shape()) body += " " + std::to_string(d);
    body += "\n";
    for (std::size_t i = 0; i < t.value.size(); ++i) body += (i ? " " : "") + fmt17(t.value[i]);
    body += "\n";
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "#checksum %016llx\n", static_cast<unsigned long long>(fnv1a(body)));
  os << body << buf;
}

std::vector<NamedTensor> read_tensors(std::istream& in, const std::string& source) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto pos = text.rfind("#checksum ");
  if (pos == std::string::npos || (pos > 0 && text[pos - 1] != '\n')) {
    throw IntegrityError(source + ": missing checksum line (truncated file?)");
  }
  const std::string stored = trim(text.substr(pos + 10));
  const std::string body = text.substr(0, pos);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(body)));
  if (stored != buf) throw IntegrityError(source + ": checksum mismatch (stored " + stored + ", computed " + buf + ")");

  std::vector<NamedTensor> out;
  std::istringstream lines(body);
  std::string header, values;
  while (std::getline(lines, header)) {
    if (trim(header).empty()) continue;
    std::istringstream hs(header);
    NamedTensor t;
    std::size_t rank = 0;
    if (!(hs >> t.name >> rank)) throw IntegrityError(source + ": malformed tensor header '" + header + "'");
    Shape shape(rank);
    for (auto& d : shape)
      if (!(hs >> d)) throw IntegrityError(source + ": malformed shape for '" + t.name + "'");
    t.value = Tensor(shape);
    if (!std::getline(lines, values)) throw IntegrityError(source + ": missing values for '" + t.name + "'");
    std::istringstream vs(values);
    std::string tok;
    std::size_t i = 0;
    while (vs >> tok) {
      if (i >= t.value.size() || !parse_double(tok, t.value[i])) {
        throw IntegrityError(source + ": bad value list for '" + t.name + "'");
      }
      ++i;
    }
    if (i != t.value.size()) throw IntegrityError(source + ": '" + t.name + "' has " + std::to_string(i) + " values");
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

constexpr const char* kModelConfigName = "meta.model_config";

Tensor encode_model_config(const model::ModelConfig& c) {
  return Tensor({9}, {double(c.nodes), double(c.window), double(c.horizon), double(c.channels), double(c.basis),
                      double(c.attention_dim), double(c.gru_hidden), double(c.kernel), c.tied_gate ? 1.0 : 0.0});
}

model::ModelConfig decode_model_config(const Tensor& t, const std::string& source) {
  if (t.shape() != Shape{9}) throw IntegrityError(source + ": malformed model config record");
  model::ModelConfig c;
  auto sz = [&](std::size_t i) { return static_cast<std::size_t>(t[i]); };
  c.nodes = sz(0);
  c.window = sz(1);
  c.horizon = sz(2);
  c.channels = sz(3);
  c.basis = sz(4);
  c.attention_dim = sz(5);
  c.gru_hidden = sz(6);
  c.kernel = sz(7);
  c.tied_gate = t[8] != 0.0;
  return c;
}

void append_store(std::vector<NamedTensor>& out, const ParamStore& store, const std::string& prefix) {
  for (Slot s = 0; s < store.size(); ++s) out.push_back({prefix + store.name(s), store.tensor(s)});
}

// Fills `store` from tensors named prefix + parameter name; every parameter
// must be present exactly once with the expected shape.
void fill_store(ParamStore& store, const std::vector<NamedTensor>& tensors, const std::string& prefix,
                const std::string& source, std::vector<bool>& used) {
  std::vector<bool> seen(store.size(), false);
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& t = tensors[k];
    if (t.name.rfind(prefix, 0) != 0) continue;
    const std::string name = t.name.substr(prefix.size());
    const auto slot = store.find(name);
    if (!slot) {
      if (prefix.empty()) continue;  // other sections are checked by their owners
      throw IntegrityError(source + ": unknown parameter '" + t.name + "'");
    }
    if (seen[*slot]) throw IntegrityError(source + ": duplicate parameter '" + t.name + "'");
    if (t.value.shape() != store.tensor(*slot).shape()) {
      throw IntegrityError(source + ": shape mismatch for '" + t.name + "': file " + shape_string(t.value.shape()) +
                           ", config " + shape_string(store.tensor(*slot).shape()));
    }
    store.tensor(*slot) = t.value;
    seen[*slot] = true;
    used[k] = true;
  }
  for (Slot s = 0; s < store.size(); ++s)
    if (!seen[s]) throw IntegrityError(source + ": missing parameter '" + prefix + store.name(s) + "'");
}

std::vector<NamedTensor> read_tensor_file(const std::string& path) {
  std::istringstream in(read_file(path, true));
  return read_tensors(in, path);
}

const NamedTensor& require_tensor(const std::vector<NamedTensor>& tensors, const std::string& name,
                                  const std::string& source, std::vector<bool>& used) {
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    if (tensors[k].name == name) {
      used[k] = true;
      return tensors[k];
    }
  }
  throw IntegrityError(source + ": missing record '" + name + "'");
}

void reject_unused(const std::vector<NamedTensor>& tensors, const std::vector<bool>& used, const std::string& source) {
  for (std::size_t k = 0; k < tensors.size(); ++k)
    if (!used[k]) throw IntegrityError(source + ": unknown parameter '" + tensors[k].name + "'");
}

model::NetworkParams network_from(const std::vector<NamedTensor>& tensors, const std::string& prefix,
                                  const model::ModelConfig& config, const std::string& source,
                                  std::vector<bool>& used) {
  model::NetworkParams net = model::init_network(config, 0);
  fill_store(net.store, tensors, prefix, source, used);
  return net;
}

}  // namespace

void save_checkpoint(const model::NetworkParams& params, const std::string& path) {
  std::vector<NamedTensor> tensors{{kModelConfigName, encode_model_config(params.config)}};
  append_store(tensors, params.store, "");
  std::ostringstream os;
  write_tensors(os, tensors);
  write_file(path, os.str());
}

model::NetworkParams load_checkpoint(const std::string& path) {
  const std::vector<NamedTensor> tensors = read_tensor_file(path);
  std::vector<bool> used(tensors.size(), false);
  const model::ModelConfig config = decode_model_config(require_tensor(tensors, kModelConfigName, path, used).value, path);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw IntegrityError(path + ": stored model config is invalid: " + e.what());
  }
  model::NetworkParams net = network_from(tensors, "", config, path, used);
  reject_unused(tensors, used, path);
  return net;
}

model::NetworkParams load_checkpoint(const std::string& path, const model::ModelConfig& expected) {
  model::NetworkParams net = load_checkpoint(path);
  if (!(net.config == expected)) {
    throw IntegrityError(path + ": checkpoint model config does not match the run config (shape mismatch)");
  }
  return net;
}

void save_train_state(const training::TrainState& state, const std::string& path) {
  std::vector<NamedTensor> tensors{{kModelConfigName, encode_model_config(state.params.config)}};
  append_store(tensors, state.params.store, "");
  append_store(tensors, state.best.store, "best.");
  for (Slot s = 0; s < state.params.store.size(); ++s)
    tensors.push_back({"rmsprop." + state.params.store.name(s), state.optimizer.mean_square[s]});
  tensors.push_back({"meta.optimizer", Tensor({2}, {state.optimizer.rho, state.optimizer.epsilon})});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  tensors.push_back({"meta.progress", Tensor({4}, {double(state.next_epoch), double(state.best_epoch),
                                                   state.best_val_mae ? 1.0 : 0.0,
                                                   state.best_val_mae ? *state.best_val_mae : nan})});
  Tensor log({state.log.size(), 5});
  for (std::size_t e = 0; e < state.log.size(); ++e) {
    const auto& l = state.log[e];
    log.at(e, 0) = double(l.epoch);
    log.at(e, 1) = l.lr;
    log.at(e, 2) = l.train_loss;
    log.at(e, 3) = l.val_mae;
    log.at(e, 4) = l.seconds;
  }
  tensors.push_back({"meta.log", log});
  std::ostringstream os;
  write_tensors(os, tensors);
  write_file(path, os.str());
}

training::TrainState load_train_state(const std::string& path) {
  const std::vector<NamedTensor> tensors = read_tensor_file(path);
  std::vector<bool> used(tensors.size(), false);
  const model::ModelConfig config = decode_model_config(require_tensor(tensors, kModelConfigName, path, used).value, path);
  training::TrainState st;
  // Unprefixed names belong to the live parameters; prefixed sections are
  // matched separately below.
  {
    st.params = model::init_network(config, 0);
    std::vector<NamedTensor> live;
    std::vector<std::size_t> index;
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const auto& n = tensors[k].name;
      if (n.rfind("best.", 0) == 0 || n.rfind("rmsprop.", 0) == 0 || n.rfind("meta.", 0) == 0) continue;
      live.push_back(tensors[k]);
      index.push_back(k);
    }
    std::vector<bool> live_used(live.size(), false);
    fill_store(st.params.store, live, "", path, live_used);
    for (std::size_t k = 0; k < live.size(); ++k) {
      if (!live_used[k]) throw IntegrityError(path + ": unknown parameter '" + live[k].name + "'");
      used[index[k]] = true;
    }
  }
  st.best = network_from(tensors, "best.", config, path, used);
  ParamStore ms = st.params.store;
  fill_store(ms, tensors, "rmsprop.", path, used);
  const Tensor& opt = require_tensor(tensors, "meta.optimizer", path, used).value;
  const Tensor& progress = require_tensor(tensors, "meta.progress", path, used).value;
  const Tensor& log = require_tensor(tensors, "meta.log", path, used).value;
  if (opt.size() != 2 || progress.size() != 4 || log.rank() != 2 || log.dim(1) != 5) {
    throw IntegrityError(path + ": malformed training metadata");
  }
  reject_unused(tensors, used, path);
  st.optimizer.rho = opt[0];
  st.optimizer.epsilon = opt[1];
  for (Slot s = 0; s < ms.size(); ++s) st.optimizer.mean_square.push_back(ms.tensor(s));
  st.next_epoch = static_cast<std::size_t>(progress[0]);
  st.best_epoch = static_cast<std::size_t>(progress[1]);
  if (progress[2] != 0.0) st.best_val_mae = progress[3];
  for (std::size_t e = 0; e < log.dim(0); ++e) {
    st.log.push_back({static_cast<std::size_t>(log.at(e, 0)), log.at(e, 1), log.at(e, 2), log.at(e, 3), log.at(e, 4)});
  }
  return st;
}

}  // namespace stemgnn::io
