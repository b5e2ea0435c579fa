#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tecswin/params.hpp"
#include "tecswin/tensor.hpp"

namespace tecswin {

struct AttentionConfig {
    int num_heads = 1;
    int head_dim = 32;
    int window = 4;
    int mlp_ratio_self = 4;
    int mlp_ratio_cross = 2;
    bool use_relative_bias = true;

    int channels() const { return num_heads * head_dim; }
};

// Table-IV placement of the scale-shift conditioning relative to the
// windowed attention; id 4 (short-cut -> Norm -> scale-shift -> GeLU -> WA)
// is the default. Ids 8 and 9 share one implementation.
struct ScaleShiftVariant {
    int id = 4;
};

// Text tokens concatenated with two time tokens, plus the pooled pathway.
// `cond` is the scale-shift source: time embedding with pooled added in.
struct ContextBundle {
    Tensor tokens;  // [B, Lctx, D]
    Tensor pooled;  // [B, D]
    Tensor cond;    // [B, D]
    std::vector<bool> masked;

    bool empty() const { return !tokens.defined() || tokens.dim(1) == 0; }
    int64_t batch() const { return tokens.dim(0); }
    int64_t len() const { return tokens.defined() ? tokens.dim(1) : 0; }
};

// Standard Swin attention mask for a cyclic shift of `shift`:
// [num_windows, win*win, win*win], 0 within a pre-shift region, -1e9 across.
Tensor make_shift_mask(int64_t H, int64_t W, int win, int shift);

// Pairwise relative-position index into a (2*win-1)^2 bias table.
std::vector<int64_t> relative_position_index(int win);

struct ScaleShiftNorms {
    Tensor gamma, beta;    // pre-attention norm
    Tensor gamma2, beta2;  // second norm, variant 6 only
};

// Applies a Table-IV conditioning row around `inner` (the attention callable).
// scale/shift: [C] or [B, C], broadcast over spatial positions.
Tensor scale_shift_apply(const Tensor& x, const Tensor& scale, const Tensor& shift,
                         ScaleShiftVariant variant,
                         const std::function<Tensor(const Tensor&)>& inner,
                         const ScaleShiftNorms& norms);

// W-MSA with context concatenated into keys/values: per window the attention
// runs over [window keys || context keys], with relative bias (and the shift
// mask, when supplied) on the window part only.
class WindowAttention {
public:
    WindowAttention(Params& p, const std::string& prefix, const AttentionConfig& cfg,
                    int ctx_dim, Tensor shared_bias_table);

    // x_windows: [N, win*win, C]; mask: [nW, L, L] or undefined; N == B * nW
    Tensor forward(const Tensor& x_windows, const ContextBundle& ctx, const Tensor& mask,
                   int64_t batch) const;

    const AttentionConfig& config() const { return cfg_; }

private:
    AttentionConfig cfg_;
    Tensor wq_, bq_, wk_, bk_, wv_, bv_;
    Tensor wkc_, bkc_, wvc_, bvc_;  // context key/value projections
    Tensor wo_, bo_;
    Tensor bias_table_;  // [(2w-1)^2, heads], shared within a stage
    std::vector<int64_t> rel_index_;
};

// Cross-attention over context tokens followed by an MLP (ratio
// mlp_ratio_cross), residual connections around both.
class CrossAttention {
public:
    CrossAttention(Params& p, const std::string& prefix, const AttentionConfig& cfg, int ctx_dim);

    // x: [B, L, C]
    Tensor forward(const Tensor& x, const ContextBundle& ctx) const;

private:
    AttentionConfig cfg_;
    Tensor norm1_g_, norm1_b_, norm2_g_, norm2_b_;
    Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
};

// One Swin block: conditioned window attention (W-MSA or SW-MSA) plus the
// LN+MLP half, optionally followed by a cross-attention layer.
class SwinBlock {
public:
    SwinBlock(Params& p, const std::string& prefix, const AttentionConfig& cfg, int ctx_dim,
              ScaleShiftVariant variant, bool shifted, bool with_cross,
              Tensor shared_bias_table);

    // x: [B, H, W, C]
    Tensor forward(const Tensor& x, const ContextBundle& ctx) const;

    bool shifted() const { return shifted_; }
    bool has_cross() const { return cross_ != nullptr; }

private:
    AttentionConfig cfg_;
    ScaleShiftVariant variant_;
    bool shifted_;
    Tensor ss_w1_, ss_b1_, ss_w2_, ss_b2_;  // cond -> (scale, shift)
    ScaleShiftNorms norms_;
    Tensor mlp_norm_g_, mlp_norm_b_;
    Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
    std::unique_ptr<WindowAttention> attn_;
    std::unique_ptr<CrossAttention> cross_;
};

}  // namespace tecswin
