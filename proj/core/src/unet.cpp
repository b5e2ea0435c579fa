#include "tecswin/unet.hpp"

#include <stdexcept>

namespace tecswin {

void ModelConfig::validate() const {
    if (stages() < 2) throw std::invalid_argument("config: need at least 2 stages");
    if (image_size % (1 << (stages() - 1)) != 0)
        throw std::invalid_argument("config: image_size not divisible by 2^(stages-1)");
    for (int s = 0; s < stages(); ++s) {
        int res = stage_resolution(s);
        int win = stage_window(s);
        if (res % win != 0)
            throw std::invalid_argument("config: stage resolution not divisible by window");
        if (stage_channels(s) % head_dim != 0)
            throw std::invalid_argument("config: stage channels not divisible by head_dim");
        if (stage_shifted(s) && depths[s] % 2 != 0)
            throw std::invalid_argument("config: shifted stage depth must be even");
    }
    if (ctx_dim % 2 != 0) throw std::invalid_argument("config: ctx_dim must be even");
}

ModelConfig ModelConfig::paper_scale() {
    ModelConfig c;
    c.image_size = 64;
    c.base_channels = 128;
    c.depths = {2, 2, 18, 2};
    c.window = 8;
    c.head_dim = 32;
    c.ctx_dim = 512;
    c.ctx_tokens = 256;
    c.enc_dim = 1024;
    c.enc_layers = 24;
    c.seq_len = 512;
    c.avg_layers = {0, 22, 23};
    return c;
}

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.image_size = 16;
    c.base_channels = 16;
    c.depths = {2, 2, 2};
    c.window = 4;
    c.head_dim = 8;
    c.ctx_dim = 32;
    c.ctx_tokens = 8;
    c.enc_dim = 32;
    c.enc_layers = 4;
    c.seq_len = 8;
    c.avg_layers = {0, 2, 3};
    return c;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.image_size = 8;
    c.base_channels = 8;
    c.depths = {2, 2, 2, 2};
    c.window = 2;
    c.head_dim = 4;
    c.ctx_dim = 8;
    c.ctx_tokens = 4;
    c.enc_dim = 8;
    c.enc_layers = 2;
    c.seq_len = 4;
    c.avg_layers = {0, 1};
    return c;
}

PatchMerge::PatchMerge(Params& p, const std::string& prefix, int64_t C) {
    w_ = p.weight(prefix + ".w", 4 * C, 2 * C);
    b_ = p.zeros(prefix + ".b", {2 * C});
    ln_g_ = p.ones(prefix + ".ln.g", {2 * C});
    ln_b_ = p.zeros(prefix + ".ln.b", {2 * C});
}

Tensor PatchMerge::forward(const Tensor& x) const {
    if (x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0)
        throw ShapeError("patch_merge: odd spatial dims");
    Tensor y = conv_1x1(pixel_unshuffle(x), w_, b_);
    return layer_norm(y, ln_g_, ln_b_);
}

PatchExpand::PatchExpand(Params& p, const std::string& prefix, int64_t C) {
    if (C % 2 != 0) throw ShapeError("patch_expand: odd channel count");
    w_ = p.weight(prefix + ".w", C, 2 * C);
    b_ = p.zeros(prefix + ".b", {2 * C});
    ln_g_ = p.ones(prefix + ".ln.g", {C / 2});
    ln_b_ = p.zeros(prefix + ".ln.b", {C / 2});
}

Tensor PatchExpand::forward(const Tensor& x) const {
    Tensor y = pixel_shuffle(silu(conv_1x1(x, w_, b_)));
    return layer_norm(y, ln_g_, ln_b_);
}

SkipFuse::SkipFuse(Params& p, const std::string& prefix, int64_t C) {
    w_ = p.weight(prefix + ".w", 2 * C, C);
    b_ = p.zeros(prefix + ".b", {C});
}

Tensor SkipFuse::forward(const Tensor& dec, const Tensor& enc) const {
    if (dec.shape() != enc.shape()) throw ShapeError("skip_fuse: shape mismatch");
    return conv_1x1(concat({dec, enc}, 3), w_, b_);
}

std::vector<SwinBlock> UNet::make_stage(Params& p, const std::string& prefix, int stage_idx,
                                        int depth, bool window_sized_rule) {
    int C = cfg_.stage_channels(stage_idx);
    AttentionConfig acfg;
    acfg.head_dim = cfg_.head_dim;
    acfg.num_heads = C / cfg_.head_dim;
    acfg.window = cfg_.stage_window(stage_idx);
    acfg.mlp_ratio_self = cfg_.mlp_ratio_self;
    acfg.mlp_ratio_cross = cfg_.mlp_ratio_cross;
    acfg.use_relative_bias = cfg_.use_relative_bias;

    // relative bias table shared per head within the stage
    Tensor bias;
    if (cfg_.use_relative_bias) {
        int64_t span = 2 * acfg.window - 1;
        bias = p.zeros(prefix + ".rel_bias", {span * span, acfg.num_heads});
    }

    bool shifted_stage = !window_sized_rule;
    std::vector<SwinBlock> blocks;
    blocks.reserve(depth);
    for (int i = 0; i < depth; ++i) {
        bool shifted = shifted_stage && (i % 2 == 1);
        // cross-attention after each SW-MSA; after each W-MSA when the
        // feature map is window-sized
        bool with_cross = shifted_stage ? shifted : true;
        blocks.emplace_back(p, prefix + ".block" + std::to_string(i), acfg, cfg_.ctx_dim,
                            ScaleShiftVariant{cfg_.scale_shift_variant}, shifted, with_cross,
                            bias);
    }
    return blocks;
}

UNet::UNet(Params& p, const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    int64_t C0 = cfg_.base_channels;
    // no patch partition: a 1x1 conv projects the input channels
    in_w_ = p.weight("in.w", cfg_.in_channels, C0);
    in_b_ = p.zeros("in.b", {C0});

    for (int s = 0; s < cfg_.stages(); ++s) {
        enc_stages_.push_back(make_stage(p, "enc" + std::to_string(s), s, cfg_.depths[s],
                                         !cfg_.stage_shifted(s)));
        if (s + 1 < cfg_.stages())
            merges_.emplace_back(p, "merge" + std::to_string(s), cfg_.stage_channels(s));
    }
    int last = cfg_.stages() - 1;
    middle_ = make_stage(p, "middle", last, cfg_.middle_depth, true);

    for (int s = last; s >= 0; --s) {
        fuses_.emplace_back(p, "fuse" + std::to_string(s), cfg_.stage_channels(s));
        dec_stages_.push_back(make_stage(p, "dec" + std::to_string(s), s, cfg_.depths[s],
                                         !cfg_.stage_shifted(s)));
        if (s > 0)
            expands_.emplace_back(p, "expand" + std::to_string(s), cfg_.stage_channels(s));
    }

    final_ln_g_ = p.ones("final.ln.g", {C0});
    final_ln_b_ = p.zeros("final.ln.b", {C0});
    out_w_ = p.weight("out.w", C0, cfg_.in_channels);
    out_b_ = p.zeros("out.b", {static_cast<int64_t>(cfg_.in_channels)});
}

Tensor UNet::forward(const Tensor& x, const ContextBundle& ctx) const {
    if (x.rank() != 4 || x.dim(1) != cfg_.image_size || x.dim(2) != cfg_.image_size ||
        x.dim(3) != cfg_.in_channels)
        throw ShapeError("unet: input shape " + shape_str(x.shape()) + " does not match config");
    if (ctx.empty() || !ctx.cond.defined())
        throw std::invalid_argument("unet: context bundle with tokens and cond required");

    Tensor h = conv_1x1(x, in_w_, in_b_);
    std::vector<Tensor> skips;
    for (int s = 0; s < cfg_.stages(); ++s) {
        for (const auto& blk : enc_stages_[s]) h = blk.forward(h, ctx);
        skips.push_back(h);
        if (s + 1 < cfg_.stages()) h = merges_[s].forward(h);
    }
    for (const auto& blk : middle_) h = blk.forward(h, ctx);

    int last = cfg_.stages() - 1;
    for (int i = 0; i <= last; ++i) {
        int s = last - i;
        h = fuses_[i].forward(h, skips[s]);
        for (const auto& blk : dec_stages_[i]) h = blk.forward(h, ctx);
        if (s > 0) h = expands_[i].forward(h);
    }
    return conv_1x1(layer_norm(h, final_ln_g_, final_ln_b_), out_w_, out_b_);
}

}  // namespace tecswin
