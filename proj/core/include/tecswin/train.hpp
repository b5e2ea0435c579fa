#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tecswin/diffusion.hpp"
#include "tecswin/model.hpp"
#include "tecswin/params.hpp"

namespace tecswin {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

class Adam {
public:
    Adam(Params& params, AdamConfig cfg = {});
    void step(double lr);
    int64_t steps_taken() const { return t_; }

private:
    Params& params_;
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

// Cosine decay from peak to floor with linear warmup over the first
// warmup_frac of total steps; the finetune preset is a flat low rate.
struct LrSchedule {
    double peak = 1.5e-4;
    double floor = 1.5e-5;
    double warmup_frac = 0.005;
    int64_t total_steps = 1;
    bool constant = false;

    double at(int64_t step) const;

    static LrSchedule cosine(int64_t total_steps, double peak = 1.5e-4,
                             double floor = 1.5e-5, double warmup_frac = 0.005);
    static LrSchedule finetune(int64_t total_steps, double lr = 1e-6);
};

struct TrainSample {
    Tensor image;  // [H,W,3] in [-1,1]
    std::string prompt;
};

struct TrainConfig {
    int64_t steps = 1000;
    int batch = 8;
    double mask_prob = 0.2;
    uint64_t seed = 7;
    LrSchedule lr;
    std::string checkpoint_path;  // empty disables checkpointing
    int64_t checkpoint_every = 0;
    int64_t log_every = 50;
};

struct TrainResult {
    std::vector<double> losses;  // one per step
    double final_loss = 0.0;
};

// Minibatch DDPM training over in-memory samples. Aborts with an exception on
// a non-finite loss so a bad run cannot silently overwrite checkpoints.
TrainResult run_train(TecSwinModel& model, const std::vector<TrainSample>& data,
                      const NoiseSchedule& schedule, const TrainConfig& cfg,
                      bool verbose = false);

}  // namespace tecswin
