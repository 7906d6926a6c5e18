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

#include "stemgnn/params.hpp"

#include <cmath>

#include "stemgnn/errors.hpp"

namespace stemgnn {

Slot ParamStore::add(std::string name, Tensor value) {
  if (find(name)) throw ConfigError("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return names_.size() - 1;
}

Slot ParamStore::add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(t));
}

std::optional<Slot> ParamStore::find(const std::string& name) const {
  for (Slot s = 0; s < names_.size(); ++s)
    if (names_[s] == name) return s;
  return std::nullopt;
}

std::size_t ParamStore::element_count() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

Binding::Binding(ad::Tape& tape, const ParamStore& store, bool trainable) : tape_(&tape) {
  vars_.reserve(store.size());
  for (Slot s = 0; s < store.size(); ++s)
    vars_.push_back(trainable ? tape.leaf(store.tensor(s)) : tape.constant(store.tensor(s)));
}

std::vector<Tensor> Binding::gradients() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const auto& v : vars_) out.push_back(tape_->grad(v));
  return out;
}

}  // namespace stemgnn
