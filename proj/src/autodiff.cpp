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

#include "stemgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stemgnn/errors.hpp"

namespace stemgnn::ad {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kHadamard: return "hadamard";
    case OpKind::kScale: return "scale";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSum: return "sum";
    case OpKind::kSliceCols: return "slice_cols";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kAddRowBias: return "add_row_bias";
    case OpKind::kConv1d: return "conv1d_same";
    case OpKind::kBatchedMatMul: return "batched_left_matmul";
    case OpKind::kSpectralMix: return "spectral_mix";
    case OpKind::kSymmetrize: return "symmetrize";
    case OpKind::kNormalizedLaplacian: return "normalized_laplacian";
    case OpKind::kEigh: return "eigh";
  }
  return "?";
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{OpKind::kLeaf, {}, std::move(value), {}, true, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpKind::kConstant, {}, std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (NodeId in : inputs) needs = needs || nodes_[in].requires_grad;
  if (!needs) backward = nullptr;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), {}, needs, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::accumulator(NodeId input) {
  Node& n = nodes_[input];
  if (!n.requires_grad) return {};
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad.data();
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ConfigError("backward: loss belongs to a different tape");
  if (value(loss.id()).size() != 1) {
    throw ConfigError("backward: loss must be scalar, got shape " +
                      shape_string(value(loss.id()).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[loss.id()].grad = Tensor(nodes_[loss.id()].value.shape(), {1.0});
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ConfigError(std::string(op) + ": operands on different tapes");
}

}  // namespace

namespace {

// Row (i * tau + s), column (m * len + l) holds x[i, m, l + s - pad], zero
// outside the series.
std::vector<double> im2col(const double* x, std::size_t ci, std::size_t series, std::size_t len, std::size_t tau) {
  const long pad = static_cast<long>(tau - 1) / 2, L = static_cast<long>(len);
  const std::size_t q = series * len;
  std::vector<double> p(ci * tau * q, 0.0);
  for (std::size_t i = 0; i < ci; ++i)
    for (std::size_t s = 0; s < tau; ++s) {
      const long shift = static_cast<long>(s) - pad;
      const long lo = std::max(0L, -shift), hi = std::min(L, L - shift);
      double* row = p.data() + (i * tau + s) * q;
      for (std::size_t m = 0; m < series; ++m) {
        const double* xrow = x + (i * series + m) * len;
        for (long l = lo; l < hi; ++l) row[m * len + l] = xrow[l + shift];
      }
    }
  return p;
}

void col2im_add(const std::vector<double>& p, double* dx, std::size_t ci, std::size_t series, std::size_t len,
                std::size_t tau) {
  const long pad = static_cast<long>(tau - 1) / 2, L = static_cast<long>(len);
  const std::size_t q = series * len;
  for (std::size_t i = 0; i < ci; ++i)
    for (std::size_t s = 0; s < tau; ++s) {
      const long shift = static_cast<long>(s) - pad;
      const long lo = std::max(0L, -shift), hi = std::min(L, L - shift);
      const double* row = p.data() + (i * tau + s) * q;
      for (std::size_t m = 0; m < series; ++m) {
        double* xrow = dx + (i * series + m) * len;
        for (long l = lo; l < hi; ++l) xrow[l + shift] += row[m * len + l];
      }
    }
}

// Four partial sums; fixed order, so results are reproducible.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tensor c = stemgnn::matmul(a.value(), b.value());
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kMatMul, {ia, ib}, std::move(c), [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (auto da = t.accumulator(ia); !da.empty()) {
      // dA = G * B^T: both operands are read along contiguous rows.
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) da[i * k + p] += dot(g.data().data() + i * n, bv.data().data() + p * n, n);
    }
    if (auto db = t.accumulator(ib); !db.empty()) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double a_ip = av[i * k + p];
          if (a_ip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) db[p * n + j] += a_ip * g[i * n + j];
        }
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  Tensor c = stemgnn::add(a.value(), b.value());
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kAdd, {ia, ib}, std::move(c), [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    for (NodeId in : {ia, ib})
      if (auto d = t.accumulator(in); !d.empty())
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  Tensor c = stemgnn::sub(a.value(), b.value());
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kSub, {ia, ib}, std::move(c), [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    if (auto d = t.accumulator(ib); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
  });
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b, "hadamard");
  require_same_shape(a.value(), b.value(), "hadamard");
  Tensor c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b.value()[i];
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kHadamard, {ia, ib}, std::move(c), [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    if (auto d = t.accumulator(ib); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
  });
}

Var scale(Var a, double c) {
  Tensor out = stemgnn::scale(a.value(), c);
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kScale, {ia}, std::move(out), [ia, c](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (auto& v : out.data()) {
    // Split by sign so exp never overflows.
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kSigmoid, {ia}, std::move(out), [ia](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = std::tanh(v);
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kTanh, {ia}, std::move(out), [ia](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax_rows(Var a) {
  require_rank(a.value(), 2, "softmax_rows");
  const std::size_t m = a.value().dim(0), n = a.value().dim(1);
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data().data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (row[j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) row[j] /= s;
  }
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kSoftmaxRows, {ia}, std::move(out), [ia, m, n](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    auto d = t.accumulator(ia);
    if (d.empty()) return;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var transpose(Var a) {
  Tensor out = stemgnn::transpose(a.value());
  const NodeId ia = a.id();
  const std::size_t m = a.value().dim(0), n = a.value().dim(1);
  return a.tape().record(OpKind::kTranspose, {ia}, std::move(out), [ia, m, n](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);  // [n x m]
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[j * m + i];
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kReshape, {ia}, std::move(out), [ia](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    if (auto d = t.accumulator(ia); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kSum, {ia}, Tensor::scalar(s), [ia](Tape& t, NodeId self) {
    const double g = t.upstream(self)[0];
    if (auto d = t.accumulator(ia); !d.empty())
      for (auto& v : d) v += g;
  });
}

Var sum_squares(Var a) { return sum(hadamard(a, a)); }

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  require_rank(a.value(), 2, "slice_cols");
  const std::size_t m = a.value().dim(0), n = a.value().dim(1);
  if (begin > end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_string(a.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = a.value().at(i, begin + j);
  const NodeId ia = a.id();
  return a.tape().record(OpKind::kSliceCols, {ia}, std::move(out),
                         [ia, m, n, w, begin](Tape& t, NodeId self) {
                           const Tensor& g = t.upstream(self);
                           if (auto d = t.accumulator(ia); !d.empty())
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < w; ++j) d[i * n + begin + j] += g[i * w + j];
                         });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& v = a.value();
  if (v.rank() == 0 || begin > end || end > v.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_string(v.shape()));
  }
  const std::size_t stride = v.size() / v.dim(0);
  Shape shape = v.shape();
  shape[0] = end - begin;
  std::vector<double> data(v.data().begin() + begin * stride, v.data().begin() + end * stride);
  const NodeId ia = a.id();
  const std::size_t offset = begin * stride;
  return a.tape().record(OpKind::kSliceRows, {ia}, Tensor(std::move(shape), std::move(data)),
                         [ia, offset](Tape& t, NodeId self) {
                           const Tensor& g = t.upstream(self);
                           if (auto d = t.accumulator(ia); !d.empty())
                             for (std::size_t i = 0; i < g.size(); ++i) d[offset + i] += g[i];
                         });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b, "concat_cols");
  require_rank(a.value(), 2, "concat_cols");
  require_rank(b.value(), 2, "concat_cols");
  const std::size_t m = a.value().dim(0), na = a.value().dim(1), nb = b.value().dim(1);
  if (b.value().dim(0) != m) {
    throw DimensionError("concat_cols: row mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const std::size_t n = na + nb;
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out.at(i, j) = a.value().at(i, j);
    for (std::size_t j = 0; j < nb; ++j) out.at(i, na + j) = b.value().at(i, j);
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kConcatCols, {ia, ib}, std::move(out),
                         [ia, ib, m, na, nb, n](Tape& t, NodeId self) {
                           const Tensor& g = t.upstream(self);
                           if (auto d = t.accumulator(ia); !d.empty())
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < na; ++j) d[i * na + j] += g[i * n + j];
                           if (auto d = t.accumulator(ib); !d.empty())
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < nb; ++j) d[i * nb + j] += g[i * n + na + j];
                         });
}

Var add_row_bias(Var x, Var b) {
  require_same_tape(x, b, "add_row_bias");
  require_rank(x.value(), 2, "add_row_bias");
  const std::size_t m = x.value().dim(0), n = x.value().dim(1);
  if (b.value().size() != n) {
    throw DimensionError("add_row_bias: bias " + shape_string(b.shape()) + " vs input " +
                         shape_string(x.shape()));
  }
  Tensor out = x.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += b.value()[j];
  const NodeId ix = x.id(), ib = b.id();
  return x.tape().record(OpKind::kAddRowBias, {ix, ib}, std::move(out), [ix, ib, m, n](Tape& t, NodeId self) {
    const Tensor& g = t.upstream(self);
    if (auto d = t.accumulator(ix); !d.empty())
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    if (auto d = t.accumulator(ib); !d.empty())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[j] += g[i * n + j];
  });
}

Var conv1d_same(Var x, Var kernels, Var bias) {
  require_same_tape(x, kernels, "conv1d_same");
  require_same_tape(x, bias, "conv1d_same");
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  require_rank(kv, 3, "conv1d_same kernels");
  const std::size_t co = kv.dim(0), ci = kv.dim(1), tau = kv.dim(2);
  if (tau % 2 == 0) {
    throw ConfigError("conv1d_same: kernel size must be odd, got " + std::to_string(tau));
  }
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("conv1d_same: input must be [C x L] or [C x M x L], got " +
                         shape_string(xv.shape()));
  }
  if (xv.dim(0) != ci) {
    throw DimensionError("conv1d_same: input " + shape_string(xv.shape()) + " vs kernels " +
                         shape_string(kv.shape()));
  }
  if (bias.value().size() != co) {
    throw DimensionError("conv1d_same: bias " + shape_string(bias.shape()) + " vs kernels " +
                         shape_string(kv.shape()));
  }
  const std::size_t len = xv.dim(xv.rank() - 1);
  const std::size_t series = xv.rank() == 3 ? xv.dim(1) : 1;
  if (len == 0) throw DimensionError("conv1d_same: empty series");

  Shape out_shape = xv.shape();
  out_shape[0] = co;
  Tensor out(out_shape);
  const std::size_t q = series * len, r = ci * tau;
  const std::vector<double> patches = im2col(xv.data().data(), ci, series, len, tau);
  const double* pk = kv.data().data();
  const double* pb = bias.value().data().data();
  double* po = out.data().data();
  // out[o, :] = b[o] + sum_r K[o, r] * P[r, :]
  for (std::size_t o = 0; o < co; ++o) {
    double* orow = po + o * q;
    for (std::size_t j = 0; j < q; ++j) orow[j] = pb[o];
    for (std::size_t k = 0; k < r; ++k) {
      const double w = pk[o * r + k];
      const double* prow = patches.data() + k * q;
      for (std::size_t j = 0; j < q; ++j) orow[j] += w * prow[j];
    }
  }

  const NodeId ix = x.id(), ik = kernels.id(), ib = bias.id();
  return x.tape().record(
      OpKind::kConv1d, {ix, ik, ib}, std::move(out),
      [ix, ik, ib, co, ci, tau, series, len, q, r](Tape& t, NodeId self) {
        const double* g = t.upstream(self).data().data();
        const double* pk = t.value(ik).data().data();
        auto dx = t.accumulator(ix);
        auto dk = t.accumulator(ik);
        auto db = t.accumulator(ib);
        if (!db.empty())
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t j = 0; j < q; ++j) db[o] += g[o * q + j];
        if (!dk.empty()) {
          const std::vector<double> patches = im2col(t.value(ix).data().data(), ci, series, len, tau);
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t k = 0; k < r; ++k) dk[o * r + k] += dot(g + o * q, patches.data() + k * q, q);
        }
        if (!dx.empty()) {
          std::vector<double> dp(r * q, 0.0);
          for (std::size_t o = 0; o < co; ++o)
            for (std::size_t k = 0; k < r; ++k) {
              const double w = pk[o * r + k];
              double* drow = dp.data() + k * q;
              const double* grow = g + o * q;
              for (std::size_t j = 0; j < q; ++j) drow[j] += w * grow[j];
            }
          col2im_add(dp, dx.data(), ci, series, len, tau);
        }
      });
}

Var batched_left_matmul(Var a, Var x) {
  require_same_tape(a, x, "batched_left_matmul");
  const Tensor& av = a.value();
  const Tensor& xv = x.value();
  require_rank(av, 2, "batched_left_matmul");
  require_rank(xv, 3, "batched_left_matmul");
  if (av.dim(1) != xv.dim(1)) {
    throw DimensionError("batched_left_matmul: " + shape_string(av.shape()) + " cannot multiply " +
                         shape_string(xv.shape()));
  }
  const std::size_t p = av.dim(0), c = xv.dim(0), n = xv.dim(1), k = xv.dim(2);
  Tensor out({c, p, k});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double aij = av.at(i, j);
        if (aij == 0.0) continue;
        for (std::size_t q = 0; q < k; ++q) out.at(ch, i, q) += aij * xv.at(ch, j, q);
      }
  const NodeId ia = a.id(), ix = x.id();
  return a.tape().record(OpKind::kBatchedMatMul, {ia, ix}, std::move(out),
                         [ia, ix, p, c, n, k](Tape& t, NodeId self) {
                           const Tensor& g = t.upstream(self);
                           const Tensor& av = t.value(ia);
                           const Tensor& xv = t.value(ix);
                           auto da = t.accumulator(ia);
                           auto dx = t.accumulator(ix);
                           for (std::size_t ch = 0; ch < c; ++ch)
                             for (std::size_t i = 0; i < p; ++i)
                               for (std::size_t j = 0; j < n; ++j) {
                                 const double* grow = &g.data()[(ch * p + i) * k];
                                 const double* xrow = &xv.data()[(ch * n + j) * k];
                                 if (!da.empty()) {
                                   double s = 0.0;
                                   for (std::size_t q = 0; q < k; ++q) s += grow[q] * xrow[q];
                                   da[i * n + j] += s;
                                 }
                                 if (!dx.empty()) {
                                   const double aij = av.at(i, j);
                                   for (std::size_t q = 0; q < k; ++q)
                                     dx[(ch * n + j) * k + q] += aij * grow[q];
                                 }
                               }
                         });
}

Var spectral_mix(Var theta, Var x) {
  require_same_tape(theta, x, "spectral_mix");
  const Tensor& tv = theta.value();
  const Tensor& xv = x.value();
  require_rank(tv, 3, "spectral_mix theta");
  require_rank(xv, 3, "spectral_mix input");
  if (tv.dim(0) != xv.dim(0) || tv.dim(2) != xv.dim(1)) {
    throw DimensionError("spectral_mix: kernel " + shape_string(tv.shape()) + " vs input " +
                         shape_string(xv.shape()));
  }
  const std::size_t ci = tv.dim(0), co = tv.dim(1), n = tv.dim(2), k = xv.dim(2);
  Tensor out({co, n, k});
  for (std::size_t i = 0; i < ci; ++i)
    for (std::size_t j = 0; j < co; ++j)
      for (std::size_t v = 0; v < n; ++v) {
        const double w = tv.at(i, j, v);
        for (std::size_t q = 0; q < k; ++q) out.at(j, v, q) += w * xv.at(i, v, q);
      }
  const NodeId it = theta.id(), ix = x.id();
  return theta.tape().record(OpKind::kSpectralMix, {it, ix}, std::move(out),
                             [it, ix, ci, co, n, k](Tape& t, NodeId self) {
                               const Tensor& g = t.upstream(self);
                               const Tensor& tv = t.value(it);
                               const Tensor& xv = t.value(ix);
                               auto dt = t.accumulator(it);
                               auto dx = t.accumulator(ix);
                               for (std::size_t i = 0; i < ci; ++i)
                                 for (std::size_t j = 0; j < co; ++j)
                                   for (std::size_t v = 0; v < n; ++v) {
                                     const double* grow = &g.data()[(j * n + v) * k];
                                     const double* xrow = &xv.data()[(i * n + v) * k];
                                     if (!dt.empty()) {
                                       double s = 0.0;
                                       for (std::size_t q = 0; q < k; ++q) s += grow[q] * xrow[q];
                                       dt[(i * co + j) * n + v] += s;
                                     }
                                     if (!dx.empty()) {
                                       const double w = tv.at(i, j, v);
                                       for (std::size_t q = 0; q < k; ++q)
                                         dx[(i * n + v) * k + q] += w * grow[q];
                                     }
                                   }
                             });
}

Var glu(Var value, Var gate) {
  require_same_shape(value.value(), gate.value(), "glu");
  return hadamard(value, sigmoid(gate));
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& at,
                                  double h) {
  if (!(h > 0.0)) throw ConfigError("finite_difference_gradient: step must be positive");
  Tensor grad(at.shape());
  Tensor probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double x0 = at[i];
    probe[i] = x0 + h;
    const double fp = f(probe);
    probe[i] = x0 - h;
    const double fm = f(probe);
    probe[i] = x0;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace stemgnn::ad
