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

// Inner-loop arithmetic shared by the solvers. Each kernel has a scalar
// reference and, on x86-64, an AVX2+FMA variant picked at first use from the
// CPU feature flags. Setting IPSRS_FORCE_SCALAR=1 in the environment pins the
// scalar path.

#include <span>
#include <string_view>

namespace ipsrs::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// Best variant the running CPU supports.
Isa detect_isa();

Isa active_isa();

// Overrides dispatch; requesting an unsupported ISA falls back to scalar.
// Returns the ISA actually installed.
Isa set_isa(Isa isa);

// sum_i x[i] * y[i]
double dot(std::span<const double> x, std::span<const double> y);

// y[i] += a * x[i]
void axpy(double a, std::span<const double> x, std::span<double> y);

// sum_i w[i] * x[i] * r[i]
double weighted_dot(std::span<const double> w, std::span<const double> x,
                    std::span<const double> r);

// sum_i w[i] * x[i]^2
double weighted_sumsq(std::span<const double> w, std::span<const double> x);

double sum(std::span<const double> x);

// Function table of one ISA. Exposed so equivalence tests can call both
// variants side by side regardless of what dispatch picked.
struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*weighted_dot)(const double*, const double*, const double*, std::size_t);
  double (*weighted_sumsq)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
};

const Table& scalar_table();

// nullptr when the build has no AVX2 variant.
const Table* avx2_table();

}  // namespace ipsrs::kernels
