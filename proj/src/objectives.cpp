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

#include "crossdiff/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "crossdiff/dataset.hpp"

namespace crossdiff {

LossBreakdown total_loss(double l_diff, double l_rec, double l_tri_cl,
                         const LossWeights& w, bool warmup) {
  const std::pair<const char*, double> parts[] = {
      {"l_diff", l_diff}, {"l_rec", l_rec}, {"l_tri_cl", l_tri_cl}};
  for (const auto& [name, value] : parts)
    if (!std::isfinite(value))
      throw std::runtime_error(std::string("non-finite loss term ") + name);
  LossBreakdown out{l_diff, l_rec, l_tri_cl, 0.0};
  if (warmup) {
    out.l_total = w.rec * l_rec;
  } else {
    out.l_total = w.diff * l_diff + w.rec * l_rec + w.tri_cl * l_tri_cl;
  }
  return out;
}

double diffusion_loss(std::span<const double> x0, std::span<const double> x0_hat) {
  if (x0.size() != x0_hat.size()) throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < x0.size(); ++i) {
    const double r = x0_hat[i] - x0[i];
    s += r * r;
  }
  return s;
}

double diffusion_loss(const Matrix& x0, const Matrix& x0_hat) {
  x0.require_same_shape(x0_hat, "diffusion_loss");
  if (x0.rows() == 0) throw std::invalid_argument("empty batch");
  double s = 0.0;
  for (int r = 0; r < x0.rows(); ++r) s += diffusion_loss(x0.row(r), x0_hat.row(r));
  return s / x0.rows();
}

double cross_entropy(std::span<const double> logits, int target) {
  const int n = static_cast<int>(logits.size());
  if (target < kFirstItem || target >= n)
    throw std::out_of_range("target outside the candidate set");
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = kFirstItem; i < n; ++i) peak = std::max(peak, logits[i]);
  double total = 0.0;
  for (int i = kFirstItem; i < n; ++i) total += std::exp(logits[i] - peak);
  return std::log(total) + peak - logits[target];
}

std::vector<double> item_logits(std::span<const double> v, const Matrix& table) {
  if (static_cast<int>(v.size()) != table.cols())
    throw std::invalid_argument("vector and table widths differ");
  std::vector<double> out(table.rows());
  for (int i = 0; i < table.rows(); ++i) {
    auto row = table.row(i);
    double s = 0.0;
    for (size_t j = 0; j < v.size(); ++j) s += v[j] * row[j];
    out[i] = s;
  }
  return out;
}

double rec_loss(std::span<const double> x0_hat, std::span<const double> view_x,
                std::span<const double> view_y, const RecTargets& targets,
                const Matrix& e_x, const Matrix& e_y) {
  if (targets.x < 0 && targets.y < 0)
    throw std::invalid_argument("training example without any target");
  double total = 0.0;
  if (targets.x >= 0)
    total += cross_entropy(item_logits(x0_hat, e_x), targets.x) +
             cross_entropy(item_logits(view_x, e_x), targets.x);
  if (targets.y >= 0)
    total += cross_entropy(item_logits(x0_hat, e_y), targets.y) +
             cross_entropy(item_logits(view_y, e_y), targets.y);
  return total;
}

double rec_loss(std::span<const double> x0_hat, std::span<const double> g_pooled,
                const RecTargets& targets, const Matrix& e_x, const Matrix& e_y) {
  return rec_loss(x0_hat, g_pooled, g_pooled, targets, e_x, e_y);
}

namespace {

// Loss and gradient with respect to the similarity matrix.
double nce_forward(const Matrix& s, int batch, Matrix* grad) {
  const int n = s.rows();
  const int terms = 2 * n;
  double loss = 0.0;
  std::vector<double> e(n);
  for (int i = 0; i < n; ++i) {
    const int user = i % batch;
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (j != i) peak = std::max(peak, s(i, j));
    double negatives = 0.0;
    for (int j = 0; j < n; ++j) {
      e[j] = j == i ? 0.0 : std::exp(s(i, j) - peak);
      if (j % batch != user) negatives += e[j];
    }
    for (int view = 0; view < 3; ++view) {
      const int j = view * batch + user;
      if (j == i) continue;
      const double denom = e[j] + negatives;
      loss += std::log(denom) - std::log(e[j]);
      if (grad == nullptr) continue;
      const double scale = 1.0 / terms;
      (*grad)(i, j) += scale * (e[j] / denom - 1.0);
      for (int k = 0; k < n; ++k)
        if (k % batch != user) (*grad)(i, k) += scale * e[k] / denom;
    }
  }
  return loss / terms;
}

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (int r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    if (s == 0.0) continue;
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : out.row(r)) v *= inv;
  }
  return out;
}

}  // namespace

double tri_view_cl_loss(const Matrix& h_c, const Matrix& h_d, const Matrix& h_aug,
                        bool normalize) {
  h_c.require_same_shape(h_d, "tri_view_cl_loss");
  h_c.require_same_shape(h_aug, "tri_view_cl_loss");
  const int b = h_c.rows();
  if (b < 2) throw std::invalid_argument("contrastive loss needs a batch of at least 2");
  Matrix all(3 * b, h_c.cols());
  const Matrix* blocks[3] = {&h_c, &h_d, &h_aug};
  for (int v = 0; v < 3; ++v)
    for (int r = 0; r < b; ++r) {
      auto src = blocks[v]->row(r);
      std::copy(src.begin(), src.end(), all.row(v * b + r).begin());
    }
  if (normalize) all = normalized_rows(all);
  Matrix s(3 * b, 3 * b);
  for (int i = 0; i < 3 * b; ++i)
    for (int j = 0; j < 3 * b; ++j) {
      double acc = 0.0;
      for (int k = 0; k < all.cols(); ++k) acc += all(i, k) * all(j, k);
      s(i, j) = acc;
    }
  return nce_forward(s, b, nullptr);
}

namespace ag {

Var softmax_cross_entropy(Tape& t, Var logits, std::vector<int> targets) {
  const Matrix& z = t.value(logits);
  if (static_cast<int>(targets.size()) != z.rows())
    throw std::invalid_argument("one target per logits row");
  const int n = z.cols();
  auto probs = std::make_shared<Matrix>(z.rows(), n);
  double loss = 0.0;
  for (int r = 0; r < z.rows(); ++r) {
    const int target = targets[r];
    if (target < kFirstItem || target >= n)
      throw std::out_of_range("target outside the candidate set");
    auto row = z.row(r);
    auto pr = probs->row(r);
    double peak = -std::numeric_limits<double>::infinity();
    for (int i = kFirstItem; i < n; ++i) peak = std::max(peak, row[i]);
    double total = 0.0;
    for (int i = kFirstItem; i < n; ++i) {
      pr[i] = std::exp(row[i] - peak);
      total += pr[i];
    }
    for (int i = kFirstItem; i < n; ++i) pr[i] /= total;
    loss += std::log(total) + peak - row[target];
  }
  return t.push(Matrix(1, 1, loss), t.requires_grad(logits),
                [logits, probs, targets = std::move(targets)](Tape& t, Var self) {
                  const double g = t.grad(self)(0, 0);
                  Matrix& gl = t.grad(logits);
                  for (int r = 0; r < probs->rows(); ++r) {
                    auto pr = probs->row(r);
                    auto out = gl.row(r);
                    for (int i = kFirstItem; i < probs->cols(); ++i) out[i] += g * pr[i];
                    out[targets[r]] -= g;
                  }
                });
}

Var tri_view_nce(Tape& t, Var views, int batch, bool normalize) {
  if (batch < 2) throw std::invalid_argument("contrastive loss needs a batch of at least 2");
  if (t.value(views).rows() != 3 * batch)
    throw std::invalid_argument("expected 3 * batch view rows");
  Var h = normalize ? l2_normalize_rows(t, views) : views;
  Var s = matmul_nt(t, h, h);
  auto grad = std::make_shared<Matrix>(3 * batch, 3 * batch);
  const double loss = nce_forward(t.value(s), batch, grad.get());
  return t.push(Matrix(1, 1, loss), t.requires_grad(s), [s, grad](Tape& t, Var self) {
    const double g = t.grad(self)(0, 0);
    Matrix& gs = t.grad(s);
    for (size_t i = 0; i < gs.size(); ++i) gs.data()[i] += g * grad->data()[i];
  });
}

}  // namespace ag
}  // namespace crossdiff
