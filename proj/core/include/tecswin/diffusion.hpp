#pragma once

#include <functional>
#include <vector>

#include "tecswin/rng.hpp"
#include "tecswin/tensor.hpp"

namespace tecswin {

// cosine signal-retention coefficient; t in [0,1], offset s = 0.008
double cosine_alpha_bar(double t, double s = 0.008);

// Discretized cosine schedule over a training grid of T steps.
struct NoiseSchedule {
    int T = 1000;
    double offset = 0.008;
    std::vector<double> alpha_bar;  // [0..T], alpha_bar[0] == 1, strictly decreasing

    static NoiseSchedule cosine(int T = 1000, double offset = 0.008);

    double beta(int t) const { return 1.0 - alpha_bar[t] / alpha_bar[t - 1]; }
    double alpha(int t) const { return alpha_bar[t] / alpha_bar[t - 1]; }

    // x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise
    Tensor q_sample(const Tensor& x0, int t, const Tensor& noise) const;

    // One ancestral step t -> t_prev (any t_prev < t, subsequence rule);
    // posterior variance beta-tilde, no noise when t_prev == 0.
    Tensor ddpm_step(const Tensor& x_t, int t, int t_prev, const Tensor& eps_hat,
                     Rng& rng) const;
};

struct GuidanceConfig {
    double cond_scale = 1.14;
    double mask_prob = 0.2;
};

// eps = eps_u + s * (eps_c - eps_u)
Tensor guided_eps(const Tensor& eps_c, const Tensor& eps_u, double s);

// Noise-prediction model boundary: masked[i] selects the null context.
class EpsModel {
public:
    virtual ~EpsModel() = default;
    virtual Tensor forward(const Tensor& x_t, const std::vector<int64_t>& ts,
                           const std::vector<bool>& masked) = 0;
};

// DDPM training objective: per-sample uniform t, context masked with
// mask_prob, MSE between injected and predicted noise.
Tensor eps_loss(EpsModel& model, const Tensor& x0_batch, const NoiseSchedule& schedule,
                double mask_prob, Rng& rng);

// Ancestral sampling over `timesteps` (inference-grid values, strictly
// decreasing, ending at 0) scaled onto the training grid; two model
// evaluations per step for classifier-free guidance; output clipped to [-1,1].
Tensor sample_loop(EpsModel& model, const Shape& image_shape,
                   const std::vector<double>& timesteps, double timestep_max,
                   const NoiseSchedule& schedule, const GuidanceConfig& guidance, Rng& rng);

}  // namespace tecswin
