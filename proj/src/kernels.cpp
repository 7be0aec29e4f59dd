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

#include "crossdiff/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crossdiff::kernels {
namespace {

struct GemmShape {
  int m, k, n;
};

GemmShape check_shapes(const Matrix& a, Op op_a, const Matrix& b, Op op_b) {
  const int m = op_a == Op::kNone ? a.rows() : a.cols();
  const int ka = op_a == Op::kNone ? a.cols() : a.rows();
  const int kb = op_b == Op::kNone ? b.rows() : b.cols();
  const int n = op_b == Op::kNone ? b.cols() : b.rows();
  if (ka != kb)
    throw std::invalid_argument("gemm inner dimension mismatch: " +
                                a.shape_string() + " * " + b.shape_string());
  return {m, ka, n};
}

void prepare_out(Matrix& out, const GemmShape& s, bool accumulate) {
  if (accumulate) {
    if (out.rows() != s.m || out.cols() != s.n)
      throw std::invalid_argument("gemm accumulate target has wrong shape");
  } else {
    out = Matrix(s.m, s.n);
  }
}

// One output row. Shared by the serial and parallel drivers so both follow
// the same summation order.
inline void gemm_row(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                     const GemmShape& s, int i, double* out_row) {
  if (op_b == Op::kNone) {
    for (int p = 0; p < s.k; ++p) {
      const double av = op_a == Op::kNone ? a(i, p) : a(p, i);
      if (av == 0.0) continue;
      const double* brow = b.data() + static_cast<size_t>(p) * s.n;
      for (int j = 0; j < s.n; ++j) out_row[j] += av * brow[j];
    }
  } else {
    for (int j = 0; j < s.n; ++j) {
      const double* brow = b.data() + static_cast<size_t>(j) * s.k;
      double acc = 0.0;
      if (op_a == Op::kNone) {
        const double* arow = a.data() + static_cast<size_t>(i) * s.k;
        for (int p = 0; p < s.k; ++p) acc += arow[p] * brow[p];
      } else {
        for (int p = 0; p < s.k; ++p) acc += a(p, i) * brow[p];
      }
      out_row[j] += acc;
    }
  }
}

constexpr long kParallelWork = 1L << 15;

}  // namespace

void gemm_serial(const Matrix& a, Op op_a, const Matrix& b, Op op_b,
                 Matrix& out, bool accumulate) {
  const GemmShape s = check_shapes(a, op_a, b, op_b);
  prepare_out(out, s, accumulate);
  for (int i = 0; i < s.m; ++i)
    gemm_row(a, op_a, b, op_b, s, i, out.data() + static_cast<size_t>(i) * s.n);
}

void gemm(const Matrix& a, Op op_a, const Matrix& b, Op op_b, Matrix& out,
          bool accumulate) {
  const GemmShape s = check_shapes(a, op_a, b, op_b);
  prepare_out(out, s, accumulate);
  const long work = static_cast<long>(s.m) * s.k * s.n;
  double* base = out.data();
#pragma omp parallel for schedule(static) if (work > kParallelWork && s.m > 1)
  for (int i = 0; i < s.m; ++i)
    gemm_row(a, op_a, b, op_b, s, i, base + static_cast<size_t>(i) * s.n);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace crossdiff::kernels
