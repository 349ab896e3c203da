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

// JSON encodings of run artifacts. Internal to the library and its tests.

#include <string>

#include "fis/bounds.hpp"
#include "fis/fairness.hpp"
#include "fis/influence.hpp"
#include "fis/sampling.hpp"
#include "json.hpp"

namespace fis {

using json = nlohmann::ordered_json;

json to_json(const FairnessReport& r);
json to_json(const InfluenceScore& s);
json to_json(const OracleResult& r);
json to_json(const RoundRecord& r);
json to_json(const BoundReport& r);
json to_json(const TrainConfig& c);
json to_json(const FisConfig& c);
json to_json(const BoundConfig& c);

TrainConfig train_config_from_json(const json& j, TrainConfig defaults = {});
FisConfig fis_config_from_json(const json& j, FisConfig defaults = {});
BoundConfig bound_config_from_json(const json& j, BoundConfig defaults = {});

/// Compact single-line dump with a fixed key order.
std::string dump_line(const json& j);

/// FNV-1a 64-bit hash, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace fis
