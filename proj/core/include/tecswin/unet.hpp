#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "tecswin/attention.hpp"
#include "tecswin/params.hpp"
#include "tecswin/tensor.hpp"

namespace tecswin {

struct ModelConfig {
    int image_size = 16;
    int in_channels = 3;
    int base_channels = 32;
    std::vector<int> depths = {2, 2, 4, 2};
    int middle_depth = 2;
    int window = 4;
    int head_dim = 32;
    int scale_shift_variant = 4;
    int mlp_ratio_self = 4;
    int mlp_ratio_cross = 2;
    bool use_relative_bias = true;

    // context / text side
    int ctx_dim = 64;     // D: width of context tokens and time embedding
    int ctx_tokens = 16;  // text tokens after projection; Lctx = ctx_tokens + 2
    int enc_dim = 64;     // stub encoder output width
    int enc_layers = 4;
    int seq_len = 16;  // stub tokenizer length
    std::vector<int> avg_layers = {0, 2, 3};

    int stages() const { return static_cast<int>(depths.size()); }
    int stage_channels(int s) const { return base_channels << s; }
    int stage_resolution(int s) const { return image_size >> s; }
    // window shrinks to the feature map when the map is window-sized or smaller
    int stage_window(int s) const { return std::min(window, stage_resolution(s)); }
    bool stage_shifted(int s) const { return stage_resolution(s) > stage_window(s); }

    void validate() const;

    static ModelConfig paper_scale();
    static ModelConfig toy();
    static ModelConfig tiny();  // gradient-check scale
};

// 2x2 neighborhood -> channels, 1x1 conv to 2C, LayerNorm (conv then norm)
class PatchMerge {
public:
    PatchMerge(Params& p, const std::string& prefix, int64_t C);
    Tensor forward(const Tensor& x) const;  // [B,H,W,C] -> [B,H/2,W/2,2C]

private:
    Tensor w_, b_, ln_g_, ln_b_;
};

// 1x1 conv C->2C, SiLU, pixel shuffle, LayerNorm (norm last)
class PatchExpand {
public:
    PatchExpand(Params& p, const std::string& prefix, int64_t C);
    Tensor forward(const Tensor& x) const;  // [B,H,W,C] -> [B,2H,2W,C/2]

private:
    Tensor w_, b_, ln_g_, ln_b_;
};

// channel concat followed by 1x1 conv back to C
class SkipFuse {
public:
    SkipFuse(Params& p, const std::string& prefix, int64_t C);
    Tensor forward(const Tensor& dec, const Tensor& enc) const;

private:
    Tensor w_, b_;
};

// Symmetric encoder-middle-decoder over Swin blocks; maps a noisy image plus
// context to predicted noise at the input resolution.
class UNet {
public:
    UNet(Params& p, const ModelConfig& cfg);

    // x: [B, S, S, in_channels]; ctx must carry tokens and cond
    Tensor forward(const Tensor& x, const ContextBundle& ctx) const;

    const ModelConfig& config() const { return cfg_; }

private:
    std::vector<SwinBlock> make_stage(Params& p, const std::string& prefix, int stage_idx,
                                      int depth, bool window_sized_rule);

    ModelConfig cfg_;
    Tensor in_w_, in_b_;
    std::vector<std::vector<SwinBlock>> enc_stages_;
    std::vector<PatchMerge> merges_;
    std::vector<SwinBlock> middle_;
    std::vector<SkipFuse> fuses_;
    std::vector<std::vector<SwinBlock>> dec_stages_;
    std::vector<PatchExpand> expands_;
    Tensor final_ln_g_, final_ln_b_, out_w_, out_b_;
};

}  // namespace tecswin
