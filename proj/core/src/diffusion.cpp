#include "tecswin/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tecswin {

double cosine_alpha_bar(double t, double s) {
    if (t < 0.0 || t > 1.0) throw std::out_of_range("cosine_alpha_bar: t outside [0,1]");
    auto f = [s](double u) {
        double c = std::cos((u + s) / (1.0 + s) * M_PI / 2.0);
        return c * c;
    };
    return f(t) / f(0.0);
}

NoiseSchedule NoiseSchedule::cosine(int T, double offset) {
    NoiseSchedule sch;
    sch.T = T;
    sch.offset = offset;
    sch.alpha_bar.resize(T + 1);
    for (int i = 0; i <= T; ++i)
        sch.alpha_bar[i] = cosine_alpha_bar(static_cast<double>(i) / T, offset);
    // cap per-step beta at 0.999 so the epsilon parameterization stays finite
    for (int i = 1; i <= T; ++i)
        sch.alpha_bar[i] = std::max(sch.alpha_bar[i], sch.alpha_bar[i - 1] * 0.001);
    return sch;
}

Tensor NoiseSchedule::q_sample(const Tensor& x0, int t, const Tensor& noise) const {
    if (t < 0 || t > T) throw std::out_of_range("q_sample: t outside schedule");
    if (noise.shape() != x0.shape()) throw ShapeError("q_sample: noise shape mismatch");
    float a = static_cast<float>(std::sqrt(alpha_bar[t]));
    float b = static_cast<float>(std::sqrt(1.0 - alpha_bar[t]));
    return add(mul_scalar(x0, a), mul_scalar(noise, b));
}

Tensor NoiseSchedule::ddpm_step(const Tensor& x_t, int t, int t_prev, const Tensor& eps_hat,
                                Rng& rng) const {
    if (!(t_prev < t)) throw std::invalid_argument("ddpm_step: t_prev must be < t");
    if (t > T || t_prev < 0) throw std::out_of_range("ddpm_step: timestep outside schedule");
    if (eps_hat.shape() != x_t.shape()) throw ShapeError("ddpm_step: eps shape mismatch");

    double abar_t = alpha_bar[t];
    double abar_p = alpha_bar[t_prev];
    double alpha_step = abar_t / abar_p;
    double beta_step = 1.0 - alpha_step;

    // x0 from the epsilon parameterization
    float inv_sqrt_abar = static_cast<float>(1.0 / std::sqrt(abar_t));
    float eps_coeff = static_cast<float>(std::sqrt(1.0 - abar_t));
    Tensor x0_hat = mul_scalar(sub(x_t, mul_scalar(eps_hat, eps_coeff)), inv_sqrt_abar);

    double c0 = std::sqrt(abar_p) * beta_step / (1.0 - abar_t);
    double c1 = std::sqrt(alpha_step) * (1.0 - abar_p) / (1.0 - abar_t);
    Tensor mean = add(mul_scalar(x0_hat, static_cast<float>(c0)),
                      mul_scalar(x_t, static_cast<float>(c1)));

    if (t_prev == 0) return mean;  // beta-tilde vanishes; deterministic final step
    double var = (1.0 - abar_p) / (1.0 - abar_t) * beta_step;
    float sigma = static_cast<float>(std::sqrt(std::max(var, 0.0)));
    Tensor z = Tensor::zeros(x_t.shape());
    for (auto& v : z.mutable_data()) v = static_cast<float>(rng.normal());
    return add(mean, mul_scalar(z, sigma));
}

Tensor guided_eps(const Tensor& eps_c, const Tensor& eps_u, double s) {
    if (eps_c.shape() != eps_u.shape()) throw ShapeError("guided_eps: shape mismatch");
    // endpoints are exact so s=1/s=0 reproduce the raw branches bitwise
    if (s == 1.0) return eps_c;
    if (s == 0.0) return eps_u;
    return add(eps_u, mul_scalar(sub(eps_c, eps_u), static_cast<float>(s)));
}

Tensor eps_loss(EpsModel& model, const Tensor& x0_batch, const NoiseSchedule& schedule,
                double mask_prob, Rng& rng) {
    int64_t B = x0_batch.dim(0);
    std::vector<int64_t> ts(B);
    std::vector<bool> masked(B);
    for (int64_t i = 0; i < B; ++i) {
        ts[i] = 1 + static_cast<int64_t>(rng.uniform_int(schedule.T));
        masked[i] = rng.bernoulli(mask_prob);
    }
    Tensor noise = Tensor::zeros(x0_batch.shape());
    for (auto& v : noise.mutable_data()) v = static_cast<float>(rng.normal());

    // per-sample q_sample stitched into one batch tensor
    std::vector<float> xt(x0_batch.numel());
    int64_t per = x0_batch.numel() / B;
    const auto& x0v = x0_batch.data();
    const auto& nv = noise.data();
    for (int64_t i = 0; i < B; ++i) {
        float a = static_cast<float>(std::sqrt(schedule.alpha_bar[ts[i]]));
        float b = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar[ts[i]]));
        for (int64_t j = 0; j < per; ++j)
            xt[i * per + j] = a * x0v[i * per + j] + b * nv[i * per + j];
    }
    Tensor x_t = Tensor::from_data(x0_batch.shape(), std::move(xt));
    Tensor eps_hat = model.forward(x_t, ts, masked);
    return mse(eps_hat, noise);
}

Tensor sample_loop(EpsModel& model, const Shape& image_shape,
                   const std::vector<double>& timesteps, double timestep_max,
                   const NoiseSchedule& schedule, const GuidanceConfig& guidance, Rng& rng) {
    if (timesteps.empty() || timesteps.back() != 0.0)
        throw std::invalid_argument("sample_loop: timestep sequence must end at 0");
    NoGradGuard ng;  // inference only; keep the loop tape-free
    int64_t B = image_shape[0];

    // map the inference grid onto the training grid, keeping strict decrease
    std::vector<int> grid;
    for (double t : timesteps) {
        int ti = static_cast<int>(std::lround(t / timestep_max * schedule.T));
        if (grid.empty() || ti < grid.back()) grid.push_back(ti);
    }
    if (grid.back() != 0) grid.push_back(0);

    Tensor x = Tensor::zeros(image_shape);
    for (auto& v : x.mutable_data()) v = static_cast<float>(rng.normal());

    std::vector<bool> cond_mask(B, false), null_mask(B, true);
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        int t = grid[i], t_prev = grid[i + 1];
        std::vector<int64_t> ts(B, t);
        Tensor eps_c = model.forward(x, ts, cond_mask);
        Tensor eps_u = model.forward(x, ts, null_mask);
        Tensor eps = guided_eps(eps_c, eps_u, guidance.cond_scale);
        x = schedule.ddpm_step(x, t, t_prev, eps, rng);
    }
    // pixel range convention [-1, 1]
    Tensor out = Tensor::from_data(x.shape(), x.data());
    for (auto& v : out.mutable_data()) v = std::clamp(v, -1.0f, 1.0f);
    return out;
}

}  // namespace tecswin
