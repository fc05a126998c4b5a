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

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ipsrs {

using WarningSink = std::function<void(std::string_view)>;

// Non-fatal conditions (clamped k, excluded groups, small-n fits) are routed
// here. The default sink writes to stderr.
void warn(std::string_view message);

// Replaces the active sink and returns the previous one.
WarningSink set_warning_sink(WarningSink sink);

// Installs a sink for the lifetime of the guard; used by tests to collect
// warnings.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace ipsrs
