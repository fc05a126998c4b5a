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
#include <atomic>
#include <cassert>
#include <cstdlib>
#include <string>

#include "ipsrs/kernels.hpp"

namespace ipsrs::kernels {
namespace {

bool force_scalar_from_env() {
  const char* value = std::getenv("IPSRS_FORCE_SCALAR");
  return value != nullptr && std::string(value) != "0" && std::string(value) != "";
}

struct Dispatch {
  std::atomic<const Table*> table{nullptr};
  std::atomic<Isa> isa{Isa::scalar};
};

Dispatch& state() {
  static Dispatch d;
  return d;
}

const Table& current() {
  const Table* t = state().table.load(std::memory_order_acquire);
  if (t == nullptr) {
    set_isa(force_scalar_from_env() ? Isa::scalar : detect_isa());
    t = state().table.load(std::memory_order_acquire);
  }
  return *t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2:
      return "avx2";
    case Isa::scalar:
      break;
  }
  return "scalar";
}

Isa detect_isa() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  if (avx2_table() != nullptr && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return Isa::avx2;
  }
#endif
  return Isa::scalar;
}

Isa active_isa() {
  current();
  return state().isa.load();
}

Isa set_isa(Isa isa) {
  if (isa == Isa::avx2 && detect_isa() != Isa::avx2) isa = Isa::scalar;
  const Table* t = isa == Isa::avx2 ? avx2_table() : &scalar_table();
  state().isa.store(isa);
  state().table.store(t, std::memory_order_release);
  return isa;
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  return current().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  current().axpy(a, x.data(), y.data(), x.size());
}

double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> r) {
  assert(w.size() == x.size() && x.size() == r.size());
  return current().weighted_dot(w.data(), x.data(), r.data(), x.size());
}

double weighted_sumsq(std::span<const double> w, std::span<const double> x) {
  assert(w.size() == x.size());
  return current().weighted_sumsq(w.data(), x.data(), x.size());
}

double sum(std::span<const double> x) { return current().sum(x.data(), x.size()); }

}  // namespace ipsrs::kernels
