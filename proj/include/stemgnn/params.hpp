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

#ifndef STEMGNN_PARAMS_HPP
#define STEMGNN_PARAMS_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stemgnn/autodiff.hpp"
#include "stemgnn/random.hpp"
#include "stemgnn/tensor.hpp"

namespace stemgnn {

/// Index of a tensor inside a ParamStore.
using Slot = std::size_t;

/// Ordered, named collection of trainable tensors. Layout structs (GruParams,
/// BlockParams, ...) hold slots into one store; the optimizer, checkpoints
/// and gradient audits iterate the store directly.
class ParamStore {
 public:
  Slot add(std::string name, Tensor value);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Slot add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng);

  std::size_t size() const { return names_.size(); }
  const std::string& name(Slot s) const { return names_[s]; }
  Tensor& tensor(Slot s) { return values_[s]; }
  const Tensor& tensor(Slot s) const { return values_[s]; }
  std::optional<Slot> find(const std::string& name) const;
  std::size_t element_count() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Every parameter of a store registered on one tape, indexed by slot.
class Binding {
 public:
  // trainable=false records constants (no gradient bookkeeping).
  Binding(ad::Tape& tape, const ParamStore& store, bool trainable = true);

  ad::Var operator[](Slot s) const { return vars_[s]; }
  ad::Tape& tape() const { return *tape_; }
  std::size_t size() const { return vars_.size(); }

  // Gradients after tape.backward(), in store order.
  std::vector<Tensor> gradients() const;

 private:
  ad::Tape* tape_;
  std::vector<ad::Var> vars_;
};

}  // namespace stemgnn

#endif  // STEMGNN_PARAMS_HPP
