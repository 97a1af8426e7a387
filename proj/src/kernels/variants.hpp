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

#include "advsr/kernels.hpp"

namespace advsr::kernels {

#if defined(ADVSR_HAVE_AVX2_TU)
const KernelTable& avx2_table_unchecked();
bool cpu_has_avx2_fma();
#endif

#if defined(ADVSR_HAVE_NEON_TU)
const KernelTable& neon_table_unchecked();
#endif

}  // namespace advsr::kernels
