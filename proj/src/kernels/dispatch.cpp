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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "advsr/kernels.hpp"
#include "kernels/variants.hpp"

namespace advsr::kernels {

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_table() {
#if defined(ADVSR_HAVE_AVX2_TU)
  static const bool supported = cpu_has_avx2_fma();
  return supported ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#if defined(ADVSR_HAVE_NEON_TU)
  return &neon_table_unchecked();
#else
  return nullptr;
#endif
}

bool backend_available(Backend b) {
  switch (b) {
    case Backend::kScalar: return true;
    case Backend::kAvx2: return avx2_table() != nullptr;
    case Backend::kNeon: return neon_table() != nullptr;
  }
  return false;
}

namespace {

const KernelTable& table_for(Backend b) {
  switch (b) {
    case Backend::kAvx2: return *avx2_table();
    case Backend::kNeon: return *neon_table();
    case Backend::kScalar: break;
  }
  return scalar_table();
}

Backend detect() {
  if (const char* env = std::getenv("ADVSR_KERNELS"); env != nullptr) {
    if (std::string(env) == "scalar") return Backend::kScalar;
  }
  if (backend_available(Backend::kAvx2)) return Backend::kAvx2;
  if (backend_available(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

struct State {
  std::atomic<Backend> backend{detect()};
  std::atomic<const KernelTable*> table{&table_for(backend.load())};
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Backend active_backend() { return state().backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::invalid_argument("kernel backend not available on this host: " +
                                std::string(backend_name(b)));
  }
  state().backend.store(b);
  state().table.store(&table_for(b));
}

const KernelTable& active() { return *state().table.load(std::memory_order_relaxed); }

}  // namespace advsr::kernels
