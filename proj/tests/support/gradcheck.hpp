// Copyright 2026 The attr2style Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "attr2style/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

// Central-difference check of the decoder loss gradient.
namespace attr2style::testing {

struct GradMismatch {
  std::string name;
  long index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel = 0.0;
};

struct GradReport {
  double max_rel = 0.0;
  long checked = 0;
  std::vector<GradMismatch> worst;  // one per array, largest error
};

// Entries smaller than 1e-6 are judged on absolute error instead: with a
// 1e-5 step and O(10) losses, central differences carry ~1e-10 of roundoff.
inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

struct DecoderProblem {
  ParamStore store;
  AttnDecoder decoder;
  AnnotationGrid grid;
  std::vector<int> ids;

  DecoderProblem(const DecoderDims& d, const DecoderOptions& o, uint64_t seed, int locations, std::vector<int> caption)
      : decoder(d, o, store), ids(std::move(caption)) {
    Rng rng(seed);
    for (int i = 0; i < store.size(); ++i)
      for (double& x : store.entry(i).data) x = rng.uniform(-0.5, 0.5);
    grid.grid_h = 1;
    grid.grid_w = locations;
    grid.features = Mat(locations, d.feature);
    for (Eigen::Index i = 0; i < grid.features.size(); ++i) grid.features.data()[i] = rng.uniform(-1.0, 1.0);
  }

  double objective(const ParamStore& p, const AnnotationGrid& g) const {
    auto s = decoder.loss(p, g, ids, static_cast<int>(ids.size()));
    return s.ce_sum + decoder.options().doubly_stochastic * s.reg;
  }
};

/// Compares every parameter entry and the annotation features.
inline GradReport check_decoder_gradients(DecoderProblem& pr, double step = 1e-5) {
  ParamStore grads = pr.store.zeros_like();
  Mat d_feat;
  pr.decoder.loss(pr.store, pr.grid, pr.ids, static_cast<int>(pr.ids.size()), nullptr, &grads, nullptr, &d_feat);

  GradReport rep;
  auto probe = [&](const std::string& name, double* x, long n, const double* analytic) {
    GradMismatch worst{name, 0, 0, 0, -1};
    for (long i = 0; i < n; ++i) {
      const double keep = x[i];
      x[i] = keep + step;
      const double up = pr.objective(pr.store, pr.grid);
      x[i] = keep - step;
      const double down = pr.objective(pr.store, pr.grid);
      x[i] = keep;
      const double num = (up - down) / (2 * step);
      const double r = rel_error(analytic[i], num);
      ++rep.checked;
      if (r > worst.rel) worst = {name, i, analytic[i], num, r};
    }
    rep.max_rel = std::max(rep.max_rel, worst.rel);
    rep.worst.push_back(worst);
  };
  for (int e = 0; e < pr.store.size(); ++e) {
    auto& ent = pr.store.entry(e);
    probe(ent.name, ent.data.data(), static_cast<long>(ent.data.size()), grads.entry(e).data.data());
  }
  probe("annotations", pr.grid.features.data(), static_cast<long>(pr.grid.features.size()), d_feat.data());
  return rep;
}

}  // namespace attr2style::testing
