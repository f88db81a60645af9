// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "iwsr/ad/fft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace iwsr::fft {
namespace {

std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t f = 3; f * f <= n; f += 2) {
    if (n % f == 0) return f;
  }
  return n;
}

cplx twiddle(std::size_t num, std::size_t den, double sign) {
  const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(num % den) /
                       static_cast<double>(den);
  return {std::cos(angle), std::sin(angle)};
}

// Decimation in time: the n-point transform of in[0], in[stride], ... is
// written contiguously to out[0..n).
void transform(const cplx* in, std::size_t stride, cplx* out, std::size_t n, double sign) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = smallest_factor(n);
  if (p == n) {
    for (std::size_t k = 0; k < n; ++k) {
      cplx acc{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) acc += in[j * stride] * twiddle(j * k, n, sign);
      out[k] = acc;
    }
    return;
  }
  const std::size_t m = n / p;
  for (std::size_t r = 0; r < p; ++r) transform(in + r * stride, stride * p, out + r * m, m, sign);

  // Butterfly of radix p; positions {k + r m} are read and rewritten together.
  std::vector<cplx> t(p);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t r = 0; r < p; ++r) t[r] = out[k + r * m] * twiddle(r * k, n, sign);
    for (std::size_t q = 0; q < p; ++q) {
      cplx acc{0.0, 0.0};
      for (std::size_t r = 0; r < p; ++r) acc += t[r] * twiddle(r * q, p, sign);
      out[k + q * m] = acc;
    }
  }
}

}  // namespace

void dft(std::span<cplx> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  std::vector<cplx> in(data.begin(), data.end());
  transform(in.data(), 1, data.data(), n, inverse ? 1.0 : -1.0);
}

void dft3(std::span<cplx> data, std::size_t n0, std::size_t n1, std::size_t n2, bool inverse) {
  std::vector<cplx> line;
  // Axis 2 (contiguous).
  for (std::size_t a = 0; a < n0 * n1; ++a) dft(data.subspan(a * n2, n2), inverse);
  // Axis 1.
  line.resize(n1);
  for (std::size_t a = 0; a < n0; ++a) {
    for (std::size_t c = 0; c < n2; ++c) {
      for (std::size_t b = 0; b < n1; ++b) line[b] = data[(a * n1 + b) * n2 + c];
      dft(line, inverse);
      for (std::size_t b = 0; b < n1; ++b) data[(a * n1 + b) * n2 + c] = line[b];
    }
  }
  // Axis 0.
  line.resize(n0);
  for (std::size_t b = 0; b < n1 * n2; ++b) {
    for (std::size_t a = 0; a < n0; ++a) line[a] = data[a * n1 * n2 + b];
    dft(line, inverse);
    for (std::size_t a = 0; a < n0; ++a) data[a * n1 * n2 + b] = line[a];
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n0 * n1 * n2));
  for (auto& v : data) v *= scale;
}

}  // namespace iwsr::fft
