#pragma once

#include <string>

#include "tecswin/diffusion.hpp"
#include "tecswin/train.hpp"
#include "tecswin/unet.hpp"

namespace tecswin {

// Everything a run needs in one JSON file: model geometry, diffusion grid,
// guidance, training knobs, seeds, and paths. Unknown keys are rejected so a
// typo cannot silently fall back to a default.
struct RunConfig {
    std::string preset = "toy";  // "toy", "paper_scale", "tiny", or "custom"
    ModelConfig model = ModelConfig::toy();

    int train_T = 1000;
    GuidanceConfig guidance;

    int64_t train_steps = 1000;
    int batch = 8;
    uint64_t seed = 7;
    uint64_t init_seed = 0x5eed;
    double lr_peak = 1.5e-4;
    double lr_floor = 1.5e-5;
    double warmup_frac = 0.005;

    std::string checkpoint_path = "model.tswc";
    int64_t checkpoint_every = 0;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace tecswin
