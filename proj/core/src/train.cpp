#include "tecswin/train.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tecswin {

Adam::Adam(Params& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& [_, t] : params_.all()) {
        m_.emplace_back(t.numel(), 0.0f);
        v_.emplace_back(t.numel(), 0.0f);
    }
}

void Adam::step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    size_t idx = 0;
    for (auto& [_, t] : params_.all()) {
        const auto& g = t.grad();
        auto& w = t.mutable_data();
        auto& m = m_[idx];
        auto& v = v_[idx];
        for (size_t i = 0; i < w.size(); ++i) {
            double gi = g[i] + cfg_.weight_decay * w[i];
            m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi);
            v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi);
            double mh = m[i] / bc1, vh = v[i] / bc2;
            w[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + cfg_.eps));
        }
        ++idx;
    }
}

double LrSchedule::at(int64_t step) const {
    if (constant) return peak;
    int64_t warm = static_cast<int64_t>(std::ceil(warmup_frac * total_steps));
    if (warm > 0 && step < warm)
        return peak * static_cast<double>(step + 1) / static_cast<double>(warm);
    double span = static_cast<double>(std::max<int64_t>(total_steps - warm, 1));
    double frac = static_cast<double>(step - warm) / span;
    frac = std::min(std::max(frac, 0.0), 1.0);
    return floor + 0.5 * (peak - floor) * (1.0 + std::cos(frac * M_PI));
}

LrSchedule LrSchedule::cosine(int64_t total_steps, double peak, double floor,
                              double warmup_frac) {
    LrSchedule s;
    s.total_steps = total_steps;
    s.peak = peak;
    s.floor = floor;
    s.warmup_frac = warmup_frac;
    return s;
}

LrSchedule LrSchedule::finetune(int64_t total_steps, double lr) {
    LrSchedule s;
    s.total_steps = total_steps;
    s.peak = lr;
    s.floor = lr;
    s.constant = true;
    return s;
}

TrainResult run_train(TecSwinModel& model, const std::vector<TrainSample>& data,
                      const NoiseSchedule& schedule, const TrainConfig& cfg, bool verbose) {
    if (data.empty()) throw std::invalid_argument("run_train: empty dataset");
    Rng rng(cfg.seed);
    Adam opt(model.params());

    // encode each distinct prompt once
    std::vector<Tensor> all_embs;
    all_embs.reserve(data.size());
    for (const auto& s : data) all_embs.push_back(model.encode_prompt(s.prompt));

    TrainResult result;
    result.losses.reserve(cfg.steps);
    for (int64_t step = 0; step < cfg.steps; ++step) {
        std::vector<Tensor> images, embs;
        for (int b = 0; b < cfg.batch; ++b) {
            int64_t i = rng.uniform_int(static_cast<int64_t>(data.size()));
            Shape s = data[i].image.shape();
            s.insert(s.begin(), 1);
            images.push_back(reshape(data[i].image, s));
            embs.push_back(all_embs[i]);
        }
        Tensor x0 = concat(images, 0);
        model.set_text_embeddings(std::move(embs));

        model.params().zero_grad();
        Tensor loss = eps_loss(model, x0, schedule, cfg.mask_prob, rng);
        double lv = loss.item();
        if (!std::isfinite(lv))
            throw std::runtime_error("run_train: non-finite loss at step " +
                                     std::to_string(step));
        backward(loss);
        opt.step(cfg.lr.at(step));
        result.losses.push_back(lv);

        if (verbose && cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
            std::printf("step %lld  loss %.5f  lr %.2e\n", static_cast<long long>(step), lv,
                        cfg.lr.at(step));
        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
            (step + 1) % cfg.checkpoint_every == 0)
            model.save(cfg.checkpoint_path);
    }
    if (!cfg.checkpoint_path.empty()) model.save(cfg.checkpoint_path);
    result.final_loss = result.losses.empty() ? 0.0 : result.losses.back();
    return result;
}

}  // namespace tecswin
