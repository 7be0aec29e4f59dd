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

// Training losses: diffusion reconstruction, disentangled recommendation
// cross-entropy and the tri-view contrastive term.

#ifndef CROSSDIFF_OBJECTIVES_HPP_
#define CROSSDIFF_OBJECTIVES_HPP_

#include <span>
#include <vector>

#include "crossdiff/autograd.hpp"
#include "crossdiff/matrix.hpp"

namespace crossdiff {

struct LossWeights {
  double diff = 1.0;
  double rec = 1.0;
  double tri_cl = 1.0;
};

struct LossBreakdown {
  double l_diff = 0.0;
  double l_rec = 0.0;
  double l_tri_cl = 0.0;
  double l_total = 0.0;
  bool operator==(const LossBreakdown&) const = default;
};

/// Weighted sum of the parts; during warm-up only l_rec counts. Throws if a
/// part is not finite, naming the term.
LossBreakdown total_loss(double l_diff, double l_rec, double l_tri_cl,
                         const LossWeights& w = {}, bool warmup = false);

// ---------------------------------------------------------------------------
// Plain versions

/// Squared Euclidean distance.
double diffusion_loss(std::span<const double> x0, std::span<const double> x0_hat);
/// Mean over rows of the squared row distance.
double diffusion_loss(const Matrix& x0, const Matrix& x0_hat);

/// -log softmax(logits)[target] over candidates [kFirstItem, size).
double cross_entropy(std::span<const double> logits, int target);

/// logits[i] = v . E[i] for every table row.
std::vector<double> item_logits(std::span<const double> v, const Matrix& table);

/// Target item per domain; -1 when the example has none in that domain.
struct RecTargets {
  int x = -1;
  int y = -1;
};

/// Sum over domains with a target of CE(x0_hat . E_d) + CE(view_d . E_d).
double rec_loss(std::span<const double> x0_hat, std::span<const double> view_x,
                std::span<const double> view_y, const RecTargets& targets,
                const Matrix& e_x, const Matrix& e_y);
/// Single pooled vector for both domains.
double rec_loss(std::span<const double> x0_hat, std::span<const double> g_pooled,
                const RecTargets& targets, const Matrix& e_x, const Matrix& e_y);

/// Mean over the 6B symmetric positive terms; each anchor's negatives are the
/// 3(B - 1) views of the other users. Rows are L2-normalized first unless
/// `normalize` is false.
double tri_view_cl_loss(const Matrix& h_c, const Matrix& h_d, const Matrix& h_aug,
                        bool normalize = true);

// ---------------------------------------------------------------------------
// Tape ops

namespace ag {

/// 1 x 1 sum over rows of -log softmax(logits_r)[targets[r]], with the
/// reserved columns excluded from the softmax.
Var softmax_cross_entropy(Tape& t, Var logits, std::vector<int> targets);

/// Contrastive loss over stacked views [h_c; h_d; h_aug] (3B x d rows,
/// user-major inside each view block).
Var tri_view_nce(Tape& t, Var views, int batch, bool normalize = true);

}  // namespace ag
}  // namespace crossdiff

#endif  // CROSSDIFF_OBJECTIVES_HPP_
