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

#include "crossdiff/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "crossdiff/kernels.hpp"

namespace crossdiff {

using kernels::Op;

GradientBuffer zeros_like(std::span<const Matrix> tensors) {
  GradientBuffer out;
  out.reserve(tensors.size());
  for (const Matrix& m : tensors) out.emplace_back(m.rows(), m.cols());
  return out;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  Var v = constant(std::move(value));
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::param(const Matrix& value, int index) {
  if (auto it = param_nodes_.find(index); it != param_nodes_.end())
    return Var{it->second};
  Node n;
  n.ref = &value;
  if (sink_ != nullptr) {
    if (index < 0 || index >= static_cast<int>(sink_->size()))
      throw std::out_of_range("parameter index outside gradient sink");
    n.requires_grad = true;
    n.sink_index = index;
  }
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(index, id);
  return Var{id};
}

Var Tape::push(Matrix value, bool requires_grad,
               std::function<void(Tape&, Var)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.ref != nullptr ? *n.ref : n.value;
}

Matrix& Tape::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) {
    const Matrix& val = n.ref != nullptr ? *n.ref : n.value;
    n.grad = Matrix(val.rows(), val.cols());
  }
  return n.grad;
}

bool Tape::has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }

void Tape::seed(Var v, const Matrix& g) {
  if (!requires_grad(v)) return;
  grad(v) += g;
}

void Tape::seed_scalar(Var v, double g) {
  Matrix m(1, 1, g);
  seed(v, m);
}

void Tape::backward() {
  if (done_) throw std::logic_error("tape already back-propagated");
  done_ = true;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, Var{i});
  }
  if (sink_ == nullptr) return;
  for (Node& n : nodes_) {
    if (n.sink_index >= 0 && !n.grad.empty()) (*sink_)[n.sink_index] += n.grad;
  }
}

AttentionMask AttentionMask::causal(std::span<const uint8_t> valid) {
  const int n = static_cast<int>(valid.size());
  AttentionMask m(n, n);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k <= q; ++k) m.set(q, k, valid[k] != 0);
  return m;
}

AttentionMask AttentionMask::diagonal(int n) {
  AttentionMask m(n, n);
  for (int i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

Matrix attention_probabilities(const Matrix& q, const Matrix& k,
                               const AttentionMask& mask, double scale) {
  if (mask.queries != q.rows() || mask.keys != k.rows())
    throw std::invalid_argument("attention mask shape mismatch");
  Matrix scores;
  kernels::gemm(q, Op::kNone, k, Op::kTranspose, scores);
  for (int i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < scores.cols(); ++j)
      if (mask.at(i, j)) peak = std::max(peak, row[j] * scale);
    if (!std::isfinite(peak)) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    double total = 0.0;
    for (int j = 0; j < scores.cols(); ++j) {
      row[j] = mask.at(i, j) ? std::exp(row[j] * scale - peak) : 0.0;
      total += row[j];
    }
    for (double& v : row) v /= total;
  }
  return scores;
}

namespace ag {
namespace {

bool any_grad(const Tape& t, Var a) { return t.requires_grad(a); }
bool any_grad(const Tape& t, Var a, Var b) {
  return t.requires_grad(a) || t.requires_grad(b);
}

Matrix column_block(const Matrix& m, int begin, int width) {
  Matrix out(m.rows(), width);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < width; ++c) out(r, c) = m(r, begin + c);
  return out;
}

void add_column_block(Matrix& dst, const Matrix& src, int begin) {
  for (int r = 0; r < src.rows(); ++r)
    for (int c = 0; c < src.cols(); ++c) dst(r, begin + c) += src(r, c);
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Matrix out;
  kernels::gemm(t.value(a), Op::kNone, t.value(b), Op::kNone, out);
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a))
      kernels::gemm(g, Op::kNone, t.value(b), Op::kTranspose, t.grad(a), true);
    if (t.requires_grad(b))
      kernels::gemm(t.value(a), Op::kTranspose, g, Op::kNone, t.grad(b), true);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Matrix out;
  kernels::gemm(t.value(a), Op::kNone, t.value(b), Op::kTranspose, out);
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a))
      kernels::gemm(g, Op::kNone, t.value(b), Op::kNone, t.grad(a), true);
    if (t.requires_grad(b))
      kernels::gemm(g, Op::kTranspose, t.value(a), Op::kNone, t.grad(b), true);
  });
}

Var add(Tape& t, Var a, Var b) {
  Matrix out = t.value(a);
  out += t.value(b);
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) += g;
  });
}

Var sub(Tape& t, Var a, Var b) {
  const Matrix& bv = t.value(b);
  Matrix out = t.value(a);
  out.require_same_shape(bv, "sub");
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] -= bv.data()[i];
  return t.push(std::move(out), any_grad(t, a, b), [a, b](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) {
      Matrix& gb = t.grad(b);
      for (size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
    }
  });
}

Var scale(Tape& t, Var a, double c) {
  Matrix out = t.value(a);
  for (double& v : out.values()) v *= c;
  return t.push(std::move(out), any_grad(t, a), [a, c](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a);
    for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += c * g.data()[i];
  });
}

Var add_row(Tape& t, Var a, Var bias) {
  const Matrix& bv = t.value(bias);
  Matrix out = t.value(a);
  if (bv.rows() != 1 || bv.cols() != out.cols())
    throw std::invalid_argument("add_row expects a 1 x cols bias");
  for (int r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (int c = 0; c < out.cols(); ++c) row[c] += bv(0, c);
  }
  return t.push(std::move(out), any_grad(t, a, bias),
                [a, bias](Tape& t, Var self) {
                  const Matrix& g = t.grad(self);
                  if (t.requires_grad(a)) t.grad(a) += g;
                  if (t.requires_grad(bias)) {
                    Matrix& gb = t.grad(bias);
                    for (int r = 0; r < g.rows(); ++r)
                      for (int c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
                  }
                });
}

Var gelu(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  Matrix out(x.rows(), x.cols());
  for (size_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  }
  return t.push(std::move(out), any_grad(t, a), [a](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad(a);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (size_t i = 0; i < x.size(); ++i) {
      const double v = x.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      ga.data()[i] += g.data()[i] * (cdf + v * pdf);
    }
  });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = t.value(x);
  const Matrix& gv = t.value(gain);
  const Matrix& bv = t.value(bias);
  const int n = xv.cols();
  if (gv.rows() != 1 || gv.cols() != n || bv.rows() != 1 || bv.cols() != n)
    throw std::invalid_argument("layer_norm parameter shape mismatch");
  Matrix normed(xv.rows(), n);
  Matrix inv_std(xv.rows(), 1);
  Matrix out(xv.rows(), n);
  for (int r = 0; r < xv.rows(); ++r) {
    auto row = xv.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(r, 0) = inv;
    for (int c = 0; c < n; ++c) {
      normed(r, c) = (row[c] - mean) * inv;
      out(r, c) = normed(r, c) * gv(0, c) + bv(0, c);
    }
  }
  const bool needs = t.requires_grad(x) || t.requires_grad(gain) ||
                     t.requires_grad(bias);
  return t.push(
      std::move(out), needs,
      [x, gain, bias, normed = std::move(normed),
       inv_std = std::move(inv_std)](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        const Matrix& gv = t.value(gain);
        const int n = g.cols();
        if (t.requires_grad(gain) || t.requires_grad(bias)) {
          for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < n; ++c) {
              if (t.requires_grad(gain)) t.grad(gain)(0, c) += g(r, c) * normed(r, c);
              if (t.requires_grad(bias)) t.grad(bias)(0, c) += g(r, c);
            }
        }
        if (!t.requires_grad(x)) return;
        Matrix& gx = t.grad(x);
        std::vector<double> dnorm(n);
        for (int r = 0; r < g.rows(); ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (int c = 0; c < n; ++c) {
            dnorm[c] = g(r, c) * gv(0, c);
            mean_d += dnorm[c];
            mean_dx += dnorm[c] * normed(r, c);
          }
          mean_d /= n;
          mean_dx /= n;
          const double inv = inv_std(r, 0);
          for (int c = 0; c < n; ++c)
            gx(r, c) += inv * (dnorm[c] - mean_d - normed(r, c) * mean_dx);
        }
      });
}

Var attention(Tape& t, Var q, Var k, Var v, const AttentionMask& mask,
              int heads) {
  const Matrix& qv = t.value(q);
  const Matrix& kv = t.value(k);
  const Matrix& vv = t.value(v);
  const int d = qv.cols();
  if (heads <= 0 || d % heads != 0)
    throw std::invalid_argument("attention width not divisible by heads");
  if (kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows())
    throw std::invalid_argument("attention q/k/v shape mismatch");
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(qv.rows(), d);
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Matrix qh = heads == 1 ? qv : column_block(qv, h * dh, dh);
    Matrix kh = heads == 1 ? kv : column_block(kv, h * dh, dh);
    Matrix vh = heads == 1 ? vv : column_block(vv, h * dh, dh);
    Matrix p = attention_probabilities(qh, kh, mask, scale);
    Matrix oh;
    kernels::gemm(p, Op::kNone, vh, Op::kNone, oh);
    add_column_block(out, oh, h * dh);
    probs->push_back(std::move(p));
  }
  const bool needs =
      t.requires_grad(q) || t.requires_grad(k) || t.requires_grad(v);
  return t.push(std::move(out), needs,
                [q, k, v, heads, dh, scale, probs](Tape& t, Var self) {
                  const Matrix& g = t.grad(self);
                  for (int h = 0; h < heads; ++h) {
                    const Matrix& p = (*probs)[h];
                    Matrix gh = heads == 1 ? g : column_block(g, h * dh, dh);
                    const Matrix& qa = t.value(q);
                    const Matrix& ka = t.value(k);
                    const Matrix& va = t.value(v);
                    Matrix qh = heads == 1 ? qa : column_block(qa, h * dh, dh);
                    Matrix kh = heads == 1 ? ka : column_block(ka, h * dh, dh);
                    Matrix vh = heads == 1 ? va : column_block(va, h * dh, dh);
                    if (t.requires_grad(v)) {
                      Matrix dv;
                      kernels::gemm(p, Op::kTranspose, gh, Op::kNone, dv);
                      add_column_block(t.grad(v), dv, h * dh);
                    }
                    if (!t.requires_grad(q) && !t.requires_grad(k)) continue;
                    Matrix dp;
                    kernels::gemm(gh, Op::kNone, vh, Op::kTranspose, dp);
                    // Softmax Jacobian; masked entries have p == 0.
                    for (int i = 0; i < dp.rows(); ++i) {
                      double dot = 0.0;
                      for (int j = 0; j < dp.cols(); ++j) dot += dp(i, j) * p(i, j);
                      for (int j = 0; j < dp.cols(); ++j)
                        dp(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
                    }
                    if (t.requires_grad(q)) {
                      Matrix dq;
                      kernels::gemm(dp, Op::kNone, kh, Op::kNone, dq);
                      add_column_block(t.grad(q), dq, h * dh);
                    }
                    if (t.requires_grad(k)) {
                      Matrix dk;
                      kernels::gemm(dp, Op::kTranspose, qh, Op::kNone, dk);
                      add_column_block(t.grad(k), dk, h * dh);
                    }
                  }
                });
}

Var select_rows(Tape& t, Var a, std::vector<int> rows) {
  const Matrix& av = t.value(a);
  Matrix out(static_cast<int>(rows.size()), av.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= av.rows())
      throw std::out_of_range("select_rows index out of range");
    auto src = av.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(i)).begin());
  }
  return t.push(std::move(out), any_grad(t, a),
                [a, rows = std::move(rows)](Tape& t, Var self) {
                  const Matrix& g = t.grad(self);
                  Matrix& ga = t.grad(a);
                  for (size_t i = 0; i < rows.size(); ++i) {
                    auto src = g.row(static_cast<int>(i));
                    auto dst = ga.row(rows[i]);
                    for (size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                  }
                });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows of nothing");
  const int cols = t.value(parts[0]).cols();
  int rows = 0;
  bool needs = false;
  for (Var p : parts) {
    if (t.value(p).cols() != cols)
      throw std::invalid_argument("concat_rows column mismatch");
    rows += t.value(p).rows();
    needs = needs || t.requires_grad(p);
  }
  Matrix out(rows, cols);
  int at = 0;
  for (Var p : parts) {
    const Matrix& pv = t.value(p);
    std::copy(pv.data(), pv.data() + pv.size(),
              out.data() + static_cast<size_t>(at) * cols);
    at += pv.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.push(std::move(out), needs,
                [inputs = std::move(inputs)](Tape& t, Var self) {
                  const Matrix& g = t.grad(self);
                  size_t offset = 0;
                  for (Var p : inputs) {
                    const size_t n = t.value(p).size();
                    if (t.requires_grad(p)) {
                      Matrix& gp = t.grad(p);
                      for (size_t i = 0; i < n; ++i)
                        gp.data()[i] += g.data()[offset + i];
                    }
                    offset += n;
                  }
                });
}

Var slice_rows(Tape& t, Var a, int begin, int end) {
  const Matrix& av = t.value(a);
  if (begin < 0 || end > av.rows() || begin > end)
    throw std::out_of_range("slice_rows range");
  Matrix out(end - begin, av.cols());
  std::copy(av.data() + static_cast<size_t>(begin) * av.cols(),
            av.data() + static_cast<size_t>(end) * av.cols(), out.data());
  return t.push(std::move(out), any_grad(t, a), [a, begin](Tape& t, Var self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(a);
    double* dst = ga.data() + static_cast<size_t>(begin) * ga.cols();
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
  });
}

Var l2_normalize_rows(Tape& t, Var a) {
  const Matrix& av = t.value(a);
  Matrix out(av.rows(), av.cols());
  Matrix norms(av.rows(), 1);
  for (int r = 0; r < av.rows(); ++r) {
    double ss = 0.0;
    for (double v : av.row(r)) ss += v * v;
    // A zero row stays zero and passes no gradient.
    const double n = std::sqrt(ss);
    norms(r, 0) = n;
    if (n == 0.0) continue;
    for (int c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) / n;
  }
  Matrix normalized = out;
  return t.push(std::move(out), any_grad(t, a),
                [a, norms = std::move(norms),
                 y = std::move(normalized)](Tape& t, Var self) {
                  const Matrix& g = t.grad(self);
                  Matrix& ga = t.grad(a);
                  for (int r = 0; r < g.rows(); ++r) {
                    if (norms(r, 0) == 0.0) continue;
                    double dot = 0.0;
                    for (int c = 0; c < g.cols(); ++c) dot += y(r, c) * g(r, c);
                    for (int c = 0; c < g.cols(); ++c)
                      ga(r, c) += (g(r, c) - y(r, c) * dot) / norms(r, 0);
                  }
                });
}

Var sum_squares(Tape& t, Var a) {
  double total = 0.0;
  for (double v : t.value(a).values()) total += v * v;
  return t.push(Matrix(1, 1, total), any_grad(t, a), [a](Tape& t, Var self) {
    const double g = t.grad(self)(0, 0);
    const Matrix& av = t.value(a);
    Matrix& ga = t.grad(a);
    for (size_t i = 0; i < av.size(); ++i) ga.data()[i] += 2.0 * g * av.data()[i];
  });
}

Var sum(Tape& t, Var a) {
  double total = 0.0;
  for (double v : t.value(a).values()) total += v;
  return t.push(Matrix(1, 1, total), any_grad(t, a), [a](Tape& t, Var self) {
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad(a).values()) v += g;
  });
}
}  // namespace ag
}  // namespace crossdiff
