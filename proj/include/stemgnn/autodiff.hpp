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

#ifndef STEMGNN_AUTODIFF_HPP
#define STEMGNN_AUTODIFF_HPP

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "stemgnn/tensor.hpp"

namespace stemgnn::ad {

using NodeId = std::size_t;

enum class OpKind {
  kLeaf,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kHadamard,
  kScale,
  kSigmoid,
  kTanh,
  kSoftmaxRows,
  kTranspose,
  kReshape,
  kSum,
  kSliceCols,
  kSliceRows,
  kConcatCols,
  kAddRowBias,
  kConv1d,
  kBatchedMatMul,
  kSpectralMix,
  kSymmetrize,
  kNormalizedLaplacian,
  kEigh,
};

const char* op_name(OpKind kind);

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Append-only record of a forward computation. Node ids grow strictly and
/// an operation's inputs always precede it, so backward is a single reverse
/// sweep. A tape belongs to one thread for one forward+backward pass.
class Tape {
 public:
  // Called with the node being differentiated once its gradient is complete.
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  Var constant(Tensor value);
  Var record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  OpKind kind(NodeId id) const { return nodes_[id].kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_[id].inputs; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  /// Seeds d(loss)=1 and sweeps nodes in decreasing id order. The loss must
  /// hold exactly one element.
  void backward(Var loss);

  /// Gradient of the last backward() w.r.t. v; zeros when v was unreachable.
  Tensor grad(Var v) const;

  // For backward functions: the completed upstream gradient of `id`, and a
  // zero-initialised accumulation buffer for an input (empty span when the
  // input does not require a gradient).
  const Tensor& upstream(NodeId id) const { return nodes_[id].grad; }
  std::span<double> accumulator(NodeId input);

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// Differentiable primitives. Binary elementwise ops require identical shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double c);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax_rows(Var a);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var sum(Var a);
Var sum_squares(Var a);
// Columns [begin, end) of a matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
// Rows [begin, end) along the leading axis of a tensor of any rank.
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_cols(Var a, Var b);
// x[m x n] + b[n] broadcast over rows.
Var add_row_bias(Var x, Var b);

/// "Same" cross-correlation with zero padding (tau-1)/2 on both sides.
/// x is [C_in x L] or [C_in x M x L] (M independent series sharing kernels);
/// kernels [C_out x C_in x tau] with tau odd; bias [C_out].
Var conv1d_same(Var x, Var kernels, Var bias);

/// out[c] = A * X[c] for X of shape [C x N x K] and A of shape [P x N].
Var batched_left_matmul(Var a, Var x);

/// Per-eigen-index filtering with channel mixing:
/// out[j,n,k] = sum_i theta[i,j,n] * x[i,n,k]; theta [Ci x Co x N], x [Ci x N x K].
Var spectral_mix(Var theta, Var x);

/// Gated linear unit value * sigmoid(gate).
Var glu(Var value, Var gate);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return hadamard(a, b); }

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& at,
                                  double h);

}  // namespace stemgnn::ad

#endif  // STEMGNN_AUTODIFF_HPP
