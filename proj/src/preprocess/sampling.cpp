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
#include "ipsrs/sampling.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <string>

#include "ipsrs/error.hpp"
#include "ipsrs/rng.hpp"

namespace ipsrs::sampling {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::ros:
      return "ros";
    case Method::rus:
      return "rus";
    case Method::cci_match:
      return "cci_match";
    case Method::none:
      break;
  }
  return "none";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::none, Method::ros, Method::rus, Method::cci_match}) {
    if (to_string(m) == text) return m;
  }
  throw ValidationError("unknown sampling method '" + std::string(text) + "'");
}

std::vector<std::size_t> resample(const TrainRows& rows, const SamplingPlan& plan) {
  if (plan.match_ratio < 1) throw ValidationError("match_ratio must be >= 1");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < rows.labels.size(); ++i) {
    (rows.labels[i] != 0 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) {
    throw SingleClassError("resampling needs both classes in the training rows");
  }

  std::vector<std::size_t> out;
  Rng rng(plan.seed);
  switch (plan.method) {
    case Method::none:
      out.resize(rows.labels.size());
      std::iota(out.begin(), out.end(), std::size_t{0});
      break;
    case Method::ros: {
      const auto& minority = pos.size() <= neg.size() ? pos : neg;
      const auto& majority = pos.size() <= neg.size() ? neg : pos;
      out.insert(out.end(), pos.begin(), pos.end());
      out.insert(out.end(), neg.begin(), neg.end());
      for (std::size_t k = minority.size(); k < majority.size(); ++k) {
        out.push_back(minority[rng.below(minority.size())]);
      }
      break;
    }
    case Method::rus: {
      auto& minority = pos.size() <= neg.size() ? pos : neg;
      auto& majority = pos.size() <= neg.size() ? neg : pos;
      rng.shuffle(majority);
      out.insert(out.end(), minority.begin(), minority.end());
      out.insert(out.end(), majority.begin(),
                 majority.begin() + static_cast<std::ptrdiff_t>(minority.size()));
      break;
    }
    case Method::cci_match: {
      if (rows.cci.size() != rows.labels.size() || rows.patient_ids.size() != rows.labels.size()) {
        throw ValidationError("cci_match needs cci and patient_id for every row");
      }
      const std::size_t needed = pos.size() * static_cast<std::size_t>(plan.match_ratio);
      if (neg.size() < needed) {
        throw ValidationError("cci_match needs " + std::to_string(needed) + " negatives, only " +
                              std::to_string(neg.size()) + " available (shortfall " +
                              std::to_string(needed - neg.size()) + ")");
      }
      auto by_id = [&](std::size_t a, std::size_t b) {
        return rows.patient_ids[a] < rows.patient_ids[b];
      };
      std::sort(pos.begin(), pos.end(), by_id);
      std::sort(neg.begin(), neg.end(), by_id);
      std::vector<bool> used(neg.size(), false);
      out.insert(out.end(), pos.begin(), pos.end());
      for (std::size_t p : pos) {
        for (int k = 0; k < plan.match_ratio; ++k) {
          std::size_t best = neg.size();
          int best_gap = 0;
          // neg is ordered by patient_id, so the first minimal gap wins ties.
          for (std::size_t j = 0; j < neg.size(); ++j) {
            if (used[j]) continue;
            const int gap = std::abs(rows.cci[neg[j]] - rows.cci[p]);
            if (best == neg.size() || gap < best_gap) {
              best = j;
              best_gap = gap;
            }
          }
          used[best] = true;
          out.push_back(neg[best]);
        }
      }
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ipsrs::sampling
