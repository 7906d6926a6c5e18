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

#ifndef STEMGNN_GRADCHECK_HPP
#define STEMGNN_GRADCHECK_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stemgnn/model.hpp"

namespace stemgnn::model {

struct GradientAuditEntry {
  std::string name;
  std::string group;
  std::size_t elements = 0;
  double max_abs_error = 0.0;  // max |analytic - numeric|
  double scale = 0.0;          // max(|analytic|, |numeric|)
};

struct GroupError {
  double max_abs_error = 0.0;
  double scale = 0.0;
  // max_abs_error / scale, 0 when the whole group has zero gradient.
  double relative() const { return scale > 0.0 ? max_abs_error / scale : 0.0; }
};

struct GradientAudit {
  std::vector<GradientAuditEntry> params;
  std::map<std::string, GroupError> groups;
  double min_eigen_gap = 0.0;  // over the audited windows
  std::size_t attempts = 0;    // draws needed to reach a well-gapped Laplacian
  double seconds = 0.0;

  bool passed(double tolerance) const;
  double worst_relative_error() const;
};

struct AuditOptions {
  std::size_t windows = 2;
  double step = 1e-5;
  double min_gap = 1e-3;
  std::size_t max_attempts = 50;
  // Default init gives near-uniform attention, hence a nearly complete graph
  // whose Laplacian is almost degenerate. Widening W_q/W_k spreads the spectrum.
  double attention_scale = 4.0;
  AblationFlags ablation;
};

/// Compares the tape gradient of the mean joint loss with central finite
/// differences over every parameter element. Draws (parameters, windows)
/// from the seed until every window's Laplacian has eigen gaps >= min_gap.
GradientAudit gradient_audit(const ModelConfig& config, std::uint64_t seed, const AuditOptions& options = {});

void write_audit_report(std::ostream& os, const GradientAudit& audit, double tolerance);

}  // namespace stemgnn::model

#endif  // STEMGNN_GRADCHECK_HPP
