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

#include "crossdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "crossdiff/rng.hpp"

namespace crossdiff {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw std::invalid_argument(std::string("non-finite value in ") + what);
}

}  // namespace

const char* schedule_shape_name(ScheduleShape) { return "linear"; }

ScheduleShape parse_schedule_shape(const std::string& name) {
  if (name == "linear") return ScheduleShape::kLinear;
  throw std::invalid_argument("unknown schedule shape '" + name + "'");
}

DiffusionSchedule build_schedule(int T, double beta_start, double beta_end,
                                 ScheduleShape shape) {
  if (T < 1) throw std::invalid_argument("diffusion needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("betas must satisfy 0 < start <= end < 1");
  DiffusionSchedule s;
  s.T = T;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.shape = shape;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bars.resize(T);
  double running = 1.0;
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    s.betas[i] = i == T - 1 && T > 1 ? beta_end
                                     : beta_start + frac * (beta_end - beta_start);
    s.alphas[i] = 1.0 - s.betas[i];
    running *= s.alphas[i];
    s.alpha_bars[i] = running;
  }
  return s;
}

NoisyState forward_diffuse(std::span<const double> x0, int t,
                           std::span<const double> eps,
                           const DiffusionSchedule& sched) {
  if (t < 1 || t > sched.T)
    throw std::out_of_range("diffusion step " + std::to_string(t) +
                            " outside [1, " + std::to_string(sched.T) + "]");
  if (x0.size() != eps.size())
    throw std::invalid_argument("x0 and eps dimensions differ");
  const double a = std::sqrt(sched.alpha_bar(t));
  const double b = std::sqrt(1.0 - sched.alpha_bar(t));
  NoisyState out{std::vector<double>(x0.size()), t,
                 std::vector<double>(eps.begin(), eps.end())};
  for (size_t i = 0; i < x0.size(); ++i) out.x_t[i] = a * x0[i] + b * eps[i];
  return out;
}

Posterior posterior(const DiffusionSchedule& sched, int t, int s) {
  if (t < 1 || t > sched.T || s < 0 || s >= t)
    throw std::out_of_range("posterior needs 0 <= s < t <= T");
  const double abar_t = sched.alpha_bar(t);
  const double abar_s = sched.alpha_bar(s);
  double beta, alpha;
  if (s == t - 1) {
    beta = sched.beta(t);
    alpha = sched.alpha(t);
  } else {
    alpha = abar_t / abar_s;
    beta = 1.0 - alpha;
  }
  Posterior p;
  p.coef_x0 = std::sqrt(abar_s) * beta / (1.0 - abar_t);
  p.coef_xt = std::sqrt(alpha) * (1.0 - abar_s) / (1.0 - abar_t);
  p.sigma = std::sqrt(beta * (1.0 - abar_s) / (1.0 - abar_t));
  return p;
}

std::vector<double> reverse_step(std::span<const double> x_t, int t,
                                 std::span<const double> x0_hat,
                                 const DiffusionSchedule& sched,
                                 std::span<const double> noise, int t_prev) {
  if (t_prev < 0) t_prev = t - 1;
  if (x_t.size() != x0_hat.size())
    throw std::invalid_argument("x_t and x0_hat dimensions differ");
  require_finite(x_t, "x_t");
  require_finite(x0_hat, "x0_hat");
  if (t_prev == 0) {
    if (t < 1 || t > sched.T) throw std::out_of_range("reverse step outside schedule");
    return {x0_hat.begin(), x0_hat.end()};
  }
  if (noise.size() != x_t.size())
    throw std::invalid_argument("noise dimension differs from x_t");
  require_finite(noise, "noise");
  const Posterior p = posterior(sched, t, t_prev);
  std::vector<double> out(x_t.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = p.coef_x0 * x0_hat[i] + p.coef_xt * x_t[i] + p.sigma * noise[i];
  return out;
}

std::vector<int> strided_steps(int T, int n_steps) {
  if (n_steps < 1 || n_steps > T)
    throw std::out_of_range("n_steps must lie in [1, T]");
  if (n_steps == 1) return {T};
  std::vector<int> steps(n_steps);
  for (int i = 0; i < n_steps; ++i)
    steps[i] = static_cast<int>(
        std::lround(T - static_cast<double>(i) * (T - 1) / (n_steps - 1)));
  return steps;
}

std::vector<double> guided_sample(const DenoiseFn& denoiser,
                                  const DiffusionSchedule& sched, int dim,
                                  uint64_t rng_seed, int n_steps) {
  const std::vector<int> steps = strided_steps(sched.T, n_steps);
  Rng rng(rng_seed);
  std::vector<double> x(dim), noise(dim);
  for (double& v : x) v = rng.normal();
  std::vector<double> x0_hat;
  for (size_t i = 0; i < steps.size(); ++i) {
    x0_hat = denoiser(x, steps[i]);
    if (i + 1 == steps.size()) break;
    for (double& v : noise) v = rng.normal();
    x = reverse_step(x, steps[i], x0_hat, sched, noise, steps[i + 1]);
  }
  return x0_hat;
}

}  // namespace crossdiff
