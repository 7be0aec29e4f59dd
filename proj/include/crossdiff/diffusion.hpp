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

// Noise schedule, forward corruption, posterior reverse transition and the
// guided sampling loop.

#ifndef CROSSDIFF_DIFFUSION_HPP_
#define CROSSDIFF_DIFFUSION_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace crossdiff {

enum class ScheduleShape { kLinear };

const char* schedule_shape_name(ScheduleShape shape);
ScheduleShape parse_schedule_shape(const std::string& name);

/// Tables are 1-based through the accessors: beta(t) for t in [1, T], and
/// alpha_bar(0) == 1 by convention.
struct DiffusionSchedule {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  ScheduleShape shape = ScheduleShape::kLinear;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(int t) const { return betas.at(t - 1); }
  double alpha(int t) const { return alphas.at(t - 1); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars.at(t - 1); }
};

DiffusionSchedule build_schedule(int T, double beta_start, double beta_end,
                                 ScheduleShape shape = ScheduleShape::kLinear);

struct NoisyState {
  std::vector<double> x_t;
  int t = 0;
  std::vector<double> eps;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
NoisyState forward_diffuse(std::span<const double> x0, int t,
                           std::span<const double> eps,
                           const DiffusionSchedule& sched);

/// Coefficients of q(x_s | x_t, x0) for s < t:
/// mean = coef_x0 * x0 + coef_xt * x_t, std = sigma.
struct Posterior {
  double coef_x0 = 0.0;
  double coef_xt = 0.0;
  double sigma = 0.0;
};

/// For s == t - 1 the stored beta_t / alpha_t are used; larger jumps use the
/// effective beta 1 - abar_t / abar_s.
Posterior posterior(const DiffusionSchedule& sched, int t, int s);

/// One reverse transition from step t to t_prev (default t - 1). Landing on
/// step 0 returns x0_hat exactly.
std::vector<double> reverse_step(std::span<const double> x_t, int t,
                                 std::span<const double> x0_hat,
                                 const DiffusionSchedule& sched,
                                 std::span<const double> noise,
                                 int t_prev = -1);

/// Descending timesteps used with n_steps denoiser calls:
/// round(T - i (T - 1) / (n - 1)) for i in [0, n); n == 1 gives {T}.
std::vector<int> strided_steps(int T, int n_steps);

/// Maps (x_t, t) to a prediction of x_0.
using DenoiseFn =
    std::function<std::vector<double>(std::span<const double> x_t, int t)>;

/// Starts from x_T ~ N(0, I) and alternates denoiser calls with reverse
/// steps over strided_steps(T, n_steps); returns the last x0 prediction.
std::vector<double> guided_sample(const DenoiseFn& denoiser,
                                  const DiffusionSchedule& sched, int dim,
                                  uint64_t rng_seed, int n_steps);

}  // namespace crossdiff

#endif  // CROSSDIFF_DIFFUSION_HPP_
