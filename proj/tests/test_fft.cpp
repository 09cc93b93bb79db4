// Copyright (c) 2026 The pkit Authors. All Rights Reserved.
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

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles/numeric_ref.hpp"
#include "pkit/fft.hpp"
#include "test_util.hpp"

using namespace pkit;

TEST_CASE("fft: impulse has a flat unit spectrum") {
  std::vector<double> x(64, 0.0);
  x[0] = 1.0;
  const auto spec = fft_real<double>(x);
  for (const auto& v : spec) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(v.imag()) < 1e-15);
  }
}

TEST_CASE("fft: Parseval on random signals") {
  for (size_t n : {2u, 8u, 256u, 4096u}) {
    const auto x = testing::random_signal(n, n);
    const auto spec = fft_real<double>(x);
    double time = 0.0, freq = 0.0;
    for (double v : x) time += v * v;
    for (const auto& v : spec) freq += std::norm(v);
    CHECK(std::abs(time - freq / static_cast<double>(n)) <= 1e-9 * time);
  }
}

TEST_CASE("fft: cosine at bin 3 of 64 matches the direct DFT") {
  std::vector<double> x(64);
  for (size_t t = 0; t < 64; ++t) x[t] = std::cos(2.0 * std::numbers::pi * 3.0 * static_cast<double>(t) / 64.0);
  const auto spec = fft_real<double>(x);
  const auto ref = oracle::direct_dft(x);
  for (size_t k = 0; k < 64; ++k) CHECK(std::abs(spec[k] - ref[k]) <= 1e-9);
  CHECK(std::abs(spec[3] - std::complex<double>(32.0, 0.0)) <= 1e-9);
  CHECK(std::abs(spec[61] - std::complex<double>(32.0, 0.0)) <= 1e-9);
}

TEST_CASE("property: fft agrees with the direct DFT") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const size_t n = size_t{1} << (1 + seed % 9);
    const auto x = testing::random_signal(n, seed + 77);
    const auto spec = fft_real<double>(x);
    const auto ref = oracle::direct_dft(x);
    for (size_t k = 0; k < n; ++k) CHECK(std::abs(spec[k] - ref[k]) <= 1e-10 * static_cast<double>(n));
  }
}

TEST_CASE("fft: inverse recovers the signal") {
  const auto x = testing::random_signal(512, 5);
  const auto spec = fft_real<double>(x);
  const auto back = ifft<double>(spec);
  for (size_t t = 0; t < x.size(); ++t) {
    CHECK(back[t].real() == doctest::Approx(x[t]).epsilon(1e-12));
    CHECK(std::abs(back[t].imag()) < 1e-12);
  }
}

TEST_CASE("fft: float instantiation") {
  std::vector<float> x = {1.0f, 2.0f, 3.0f, 4.0f};
  const auto spec = fft_real<float>(x);
  CHECK(spec[0].real() == doctest::Approx(10.0));
  CHECK(spec[2].real() == doctest::Approx(-2.0));
}

TEST_CASE("fft: non-power-of-two length is rejected") {
  std::vector<std::complex<double>> x(12);
  CHECK_THROWS_WITH_AS(fft_inplace<double>(x), doctest::Contains("not a power of two"), Error);
  CHECK(next_power_of_two(200) == 256);
  CHECK(next_power_of_two(256) == 256);
  CHECK_FALSE(is_power_of_two(0));
}
