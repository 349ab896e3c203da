// Copyright 2026 The fairsample Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "fis/data.hpp"
#include "fis/model.hpp"
#include "fis/rng.hpp"

namespace fis::testing {

/// Builds a fully grouped dataset from rows (features..., label, group).
inline Dataset make_dataset(std::size_t dim, const std::vector<std::vector<double>>& rows,
                            int num_classes = 2, int num_groups = 2) {
  Dataset ds("fixture", dim, num_classes, num_groups);
  std::size_t id = 0;
  for (const auto& row : rows) {
    Example e;
    e.id = id++;
    e.features.assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(dim));
    e.label = static_cast<int>(row[dim]);
    e.group = static_cast<int>(row[dim + 1]);
    ds.add(std::move(e));
  }
  return ds;
}

/// Gaussian blobs: label decides the mean sign of x0, group shifts x1.
inline Dataset random_dataset(std::size_t n, std::size_t dim, std::uint64_t seed, int num_classes = 2,
                              int num_groups = 2) {
  Rng rng(seed);
  Dataset ds("random", dim, num_classes, num_groups);
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = i;
    const int y = static_cast<int>(rng.below(static_cast<std::size_t>(num_classes)));
    const int g = static_cast<int>(rng.below(static_cast<std::size_t>(num_groups)));
    e.features.resize(dim);
    for (auto& v : e.features) v = rng.normal();
    e.features[0] += 1.5 * (2.0 * y - (num_classes - 1));
    if (dim > 1) e.features[1] += 0.8 * g;
    e.label = y;
    e.group = g;
    ds.add(std::move(e));
  }
  return ds;
}

/// Central difference of f along parameter i.
inline double central_difference(Mlp m, std::size_t i, double h, const std::function<double(const Mlp&)>& f) {
  const double orig = m.params()[i];
  m.mutable_params()[i] = orig + h;
  const double up = f(m);
  m.mutable_params()[i] = orig - h;
  const double down = f(m);
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace fis::testing
