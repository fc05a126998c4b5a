//
// Copyright 2026 The ipsrs Authors
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
//
#pragma once

// Class-imbalance handling for the training partition.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ipsrs::sampling {

enum class Method { none, ros, rus, cci_match };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct SamplingPlan {
  Method method = Method::none;
  std::uint64_t seed = 0;
  int match_ratio = 1;  // matched negatives per positive
};

struct TrainRows {
  std::span<const int> labels;
  std::span<const std::int64_t> patient_ids;  // cci_match only
  std::span<const int> cci;                    // cci_match only
};

// Returns a sorted multiset of row indices into `rows`:
//   ros  - minority rows duplicated with replacement until classes are equal
//   rus  - majority rows subsampled without replacement until equal
//   cci_match - each positive (ascending patient_id) greedily takes the
//               unmatched negative with the closest CCI, ties to the smallest
//               patient_id, match_ratio times
std::vector<std::size_t> resample(const TrainRows& rows, const SamplingPlan& plan);

}  // namespace ipsrs::sampling
