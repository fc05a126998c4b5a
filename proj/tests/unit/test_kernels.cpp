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
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ipsrs/kernels.hpp"
#include "ipsrs/rng.hpp"

using namespace ipsrs;
using namespace ipsrs::kernels;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  Rng rng(3);
  const auto x = random_vector(rng, 37);
  const auto y = random_vector(rng, 37);
  const auto& t = scalar_table();
  double d = 0.0, s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d += x[i] * y[i];
    s += x[i];
  }
  CHECK(t.dot(x.data(), y.data(), x.size()) == doctest::Approx(d).epsilon(1e-14));
  CHECK(t.sum(x.data(), x.size()) == doctest::Approx(s).epsilon(1e-14));
  CHECK(t.dot(x.data(), y.data(), 0) == 0.0);
}

TEST_CASE("avx2 kernels agree with scalar kernels") {
  const Table* fast = avx2_table();
  if (fast == nullptr || detect_isa() != Isa::avx2) {
    MESSAGE("avx2 unavailable on this host; equivalence not exercised");
    return;
  }
  const Table& ref = scalar_table();
  Rng rng(11);
  for (std::size_t n = 0; n < 70; ++n) {
    CAPTURE(n);
    const auto w = random_vector(rng, n);
    const auto x = random_vector(rng, n, 3.0);
    const auto r = random_vector(rng, n, 0.5);
    std::vector<double> wabs(w);
    for (double& v : wabs) v = std::abs(v);
    CHECK(close(fast->dot(x.data(), r.data(), n), ref.dot(x.data(), r.data(), n), 1e-12));
    CHECK(close(fast->sum(x.data(), n), ref.sum(x.data(), n), 1e-12));
    CHECK(close(fast->weighted_dot(wabs.data(), x.data(), r.data(), n),
                ref.weighted_dot(wabs.data(), x.data(), r.data(), n), 1e-12));
    CHECK(close(fast->weighted_sumsq(wabs.data(), x.data(), n),
                ref.weighted_sumsq(wabs.data(), x.data(), n), 1e-12));
    std::vector<double> ya(r), yb(r);
    fast->axpy(0.37, x.data(), ya.data(), n);
    ref.axpy(0.37, x.data(), yb.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(ya[i], yb[i], 1e-14));
  }
}

TEST_CASE("set_isa switches the dispatched table") {
  const Isa before = active_isa();
  CHECK(set_isa(Isa::scalar) == Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(isa_name(Isa::scalar) == "scalar");
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
  set_isa(before);
  CHECK(dot(a, b) == 32.0);
}
