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

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation applied to its nodes; backward() replays
// the recorded closures in reverse creation order. Parameters enter a tape
// by reference (no copy) and their gradients are flushed into a
// GradientBuffer whose layout mirrors the parameter list.

#ifndef CROSSDIFF_AUTOGRAD_HPP_
#define CROSSDIFF_AUTOGRAD_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "crossdiff/matrix.hpp"

namespace crossdiff {

using GradientBuffer = std::vector<Matrix>;

class Tape;

/// Zero-filled buffer with the same shapes as `tensors`.
GradientBuffer zeros_like(std::span<const Matrix> tensors);

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape {
 public:
  /// With a null sink, parameters are treated as constants (inference mode).
  explicit Tape(GradientBuffer* sink = nullptr) : sink_(sink) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value);
  /// A leaf whose gradient is wanted by the caller.
  Var variable(Matrix value);
  /// Parameter `index` of the sink layout; repeated calls return one node.
  Var param(const Matrix& value, int index);

  /// Records an op result. `backward` reads grad(result) and accumulates
  /// into its inputs' grads; it is dropped when no input needs a gradient.
  /// Closures receive the tape and the result node as arguments, so tapes
  /// stay movable.
  Var push(Matrix value, bool requires_grad,
           std::function<void(Tape&, Var)> backward);

  const Matrix& value(Var v) const;
  /// Gradient accumulator of `v`, allocated (zeroed) on first access.
  Matrix& grad(Var v);
  bool has_grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Adds `g` to the gradient of `v`. Several outputs may be seeded before
  /// a single backward() call.
  void seed(Var v, const Matrix& g);
  void seed_scalar(Var v, double g = 1.0);

  /// Propagates all seeded gradients and flushes parameter gradients into
  /// the sink. A tape can be back-propagated once.
  void backward();

  GradientBuffer* sink() { return sink_; }
  bool tracking() const { return sink_ != nullptr; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    int sink_index = -1;
    std::function<void(Tape&, Var)> backward;
  };

  GradientBuffer* sink_;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
  bool done_ = false;
};

/// Which (query, key) pairs may attend. Rows without any allowed key produce
/// a zero attention output instead of NaN.
struct AttentionMask {
  int queries = 0;
  int keys = 0;
  std::vector<uint8_t> allowed;

  AttentionMask() = default;
  AttentionMask(int q, int k, bool value = false)
      : queries(q), keys(k), allowed(static_cast<size_t>(q) * k, value) {}

  bool at(int q, int k) const { return allowed[static_cast<size_t>(q) * keys + k] != 0; }
  void set(int q, int k, bool v) { allowed[static_cast<size_t>(q) * keys + k] = v; }

  /// Causal self-attention over `valid.size()` positions; invalid (padding)
  /// keys are never attended.
  static AttentionMask causal(std::span<const uint8_t> valid);
  /// Each position attends only to itself.
  static AttentionMask diagonal(int n);
};

/// Masked, row-wise softmax probabilities of q k^T * scale for one head.
/// Exposed for tests; attention() uses the same routine.
Matrix attention_probabilities(const Matrix& q, const Matrix& k,
                               const AttentionMask& mask, double scale);

namespace ag {

Var matmul(Tape& t, Var a, Var b);
/// a * b^T
Var matmul_nt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
/// Adds the 1 x n row `bias` to every row of `a`.
Var add_row(Tape& t, Var a, Var bias);
/// Exact GELU, x * Phi(x).
Var gelu(Tape& t, Var a);
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
/// Multi-head scaled dot-product attention over pre-projected q, k, v.
Var attention(Tape& t, Var q, Var k, Var v, const AttentionMask& mask,
              int heads);
/// Row gather; indices may repeat (gradients are summed).
Var select_rows(Tape& t, Var a, std::vector<int> rows);
Var concat_rows(Tape& t, std::span<const Var> parts);
Var slice_rows(Tape& t, Var a, int begin, int end);
/// Row-wise x / |x|; zero rows stay zero.
Var l2_normalize_rows(Tape& t, Var a);
/// 1 x 1 sum of squared entries.
Var sum_squares(Tape& t, Var a);
/// 1 x 1 sum of entries.
Var sum(Tape& t, Var a);

}  // namespace ag
}  // namespace crossdiff

#endif  // CROSSDIFF_AUTOGRAD_HPP_
