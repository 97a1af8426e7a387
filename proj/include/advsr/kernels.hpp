// Copyright 2026 The advsr-lab Authors.
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

// Dense double-precision inner loops used by the model. Every routine has a
// scalar reference implementation; SIMD variants (AVX2+FMA on x86-64, NEON on
// AArch64) are selected once at startup from the host CPU features and can be
// overridden for testing or with ADVSR_KERNELS=scalar in the environment.

#include <cstddef>
#include <span>
#include <string_view>

namespace advsr::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend b);

struct KernelTable {
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // y[i] += x[i]
  void (*add)(const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table();
// Null when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table();
const KernelTable* neon_table();

bool backend_available(Backend b);
Backend active_backend();
// Throws std::invalid_argument if the backend is unavailable on this host.
void set_backend(Backend b);
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) {
  active().scale(alpha, x.data(), x.size());
}
inline void add(std::span<const double> x, std::span<double> y) {
  active().add(x.data(), y.data(), x.size());
}

// RAII override of the active backend, restoring the previous one on exit.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(active_backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

}  // namespace advsr::kernels
