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

#pragma once

#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "pkit/core.hpp"

namespace pkit {

constexpr bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr size_t next_power_of_two(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place iterative radix-2 decimation-in-time FFT. `inverse` uses the
/// conjugate twiddles and scales by 1/n.
template <class T>
void fft_inplace(std::span<std::complex<T>> data, bool inverse = false) {
  const size_t n = data.size();
  if (!is_power_of_two(n)) throw Error("fft: length " + std::to_string(n) + " is not a power of two");

  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const T sign = inverse ? T(1) : T(-1);
  for (size_t len = 2; len <= n; len <<= 1) {
    const size_t half = len / 2;
    // Twiddles computed directly per index; recurrences drift at large n.
    for (size_t k = 0; k < half; ++k) {
      const T angle = sign * T(2) * std::numbers::pi_v<T> * static_cast<T>(k) / static_cast<T>(len);
      const std::complex<T> w(std::cos(angle), std::sin(angle));
      for (size_t start = 0; start < n; start += len) {
        std::complex<T> u = data[start + k];
        std::complex<T> v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const T scale = T(1) / static_cast<T>(n);
    for (auto& x : data) x *= scale;
  }
}

/// Full complex spectrum of a real signal whose length is a power of two.
template <class T>
std::vector<std::complex<T>> fft_real(std::span<const T> signal) {
  std::vector<std::complex<T>> out(signal.begin(), signal.end());
  fft_inplace<T>(out);
  return out;
}

template <class T>
std::vector<std::complex<T>> ifft(std::span<const std::complex<T>> spectrum) {
  std::vector<std::complex<T>> out(spectrum.begin(), spectrum.end());
  fft_inplace<T>(out, true);
  return out;
}

}  // namespace pkit
