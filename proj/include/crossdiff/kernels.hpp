// Copyright 2026 The crossdiff Authors.
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

// Dense kernels. Each parallel kernel has a serial reference twin with the
// same per-element accumulation order, so the two agree bitwise; the
// reference is what the unit tests and the benchmark compare against.

#ifndef CROSSDIFF_KERNELS_HPP_
#define CROSSDIFF_KERNELS_HPP_

#include "crossdiff/matrix.hpp"

namespace crossdiff::kernels {

enum class Op { kNone, kTranspose };

/// out (+)= op(a) * op(b). `out` is resized when not accumulating.
void gemm_serial(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                 Matrix& out, bool accumulate = false);

/// OpenMP version, parallel over output rows once the work exceeds a small
/// threshold.
void gemm(const Matrix& a, Op op_a, const Matrix& b, Op op_b, Matrix& out,
          bool accumulate = false);

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace crossdiff::kernels

#endif  // CROSSDIFF_KERNELS_HPP_
