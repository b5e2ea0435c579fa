#include "tecswin/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace tecswin {

namespace {
constexpr float kMaskNegInf = -1e9f;

Tensor broadcast_cond(const Tensor& t, const Tensor& x) {
    // [C] broadcasts as-is; [B,C] needs singleton spatial axes inserted
    if (t.rank() <= 1 || x.rank() <= 2) return t;
    Shape s;
    s.push_back(t.dim(0));
    for (int i = 1; i < x.rank() - 1; ++i) s.push_back(1);
    s.push_back(t.dim(1));
    return reshape(t, s);
}
}  // namespace

Tensor make_shift_mask(int64_t H, int64_t W, int win, int shift) {
    int64_t nh = H / win, nw = W / win;
    std::vector<int> region(H * W);
    int cnt = 0;
    int64_t hb[4] = {0, H - win, H - shift, H};
    int64_t wb[4] = {0, W - win, W - shift, W};
    for (int hs = 0; hs < 3; ++hs)
        for (int ws = 0; ws < 3; ++ws) {
            for (int64_t h = hb[hs]; h < hb[hs + 1]; ++h)
                for (int64_t w = wb[ws]; w < wb[ws + 1]; ++w) region[h * W + w] = cnt;
            ++cnt;
        }
    auto mod = [](int64_t a, int64_t m) { return ((a % m) + m) % m; };
    int64_t L = static_cast<int64_t>(win) * win;
    std::vector<float> mask(nh * nw * L * L, 0.0f);
    std::vector<int> wid(L);
    for (int64_t wh = 0; wh < nh; ++wh)
        for (int64_t ww = 0; ww < nw; ++ww) {
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    // region id of this slot in the shifted image
                    int64_t sh = mod(wh * win + y + shift, H);
                    int64_t sw = mod(ww * win + x + shift, W);
                    wid[y * win + x] = region[sh * W + sw];
                }
            float* m = mask.data() + (wh * nw + ww) * L * L;
            for (int64_t i = 0; i < L; ++i)
                for (int64_t j = 0; j < L; ++j)
                    if (wid[i] != wid[j]) m[i * L + j] = kMaskNegInf;
        }
    return Tensor::from_data({nh * nw, L, L}, std::move(mask));
}

std::vector<int64_t> relative_position_index(int win) {
    int64_t L = static_cast<int64_t>(win) * win;
    std::vector<int64_t> idx(L * L);
    for (int64_t i = 0; i < L; ++i)
        for (int64_t j = 0; j < L; ++j) {
            int64_t dy = i / win - j / win + win - 1;
            int64_t dx = i % win - j % win + win - 1;
            idx[i * L + j] = dy * (2 * win - 1) + dx;
        }
    return idx;
}

Tensor scale_shift_apply(const Tensor& x, const Tensor& scale, const Tensor& shift,
                         ScaleShiftVariant variant,
                         const std::function<Tensor(const Tensor&)>& inner,
                         const ScaleShiftNorms& norms) {
    Tensor sc = broadcast_cond(scale, x);
    Tensor sh = broadcast_cond(shift, x);
    auto apply_ss = [&](const Tensor& t) { return add(mul(t, add_scalar(sc, 1.0f)), sh); };
    auto norm = [&](const Tensor& t) { return layer_norm(t, norms.gamma, norms.beta); };

    switch (variant.id) {
        case 1:  // after Swin, individual of residual
            return apply_ss(add(x, inner(norm(x))));
        case 2:
            return add(x, inner(norm(gelu(apply_ss(x)))));
        case 3:
            return add(x, inner(norm(gelu(x))));
        case 4:
        case 8:
        case 9:  // 8/9: same placement at the attention site
            return add(x, inner(gelu(apply_ss(norm(x)))));
        case 5:
            return add(x, inner(apply_ss(norm(x))));
        case 6:
            return add(x, inner(layer_norm(gelu(apply_ss(norm(x))), norms.gamma2, norms.beta2)));
        case 7:  // after Swin block, individual of short-cut
            return add(x, apply_ss(inner(norm(x))));
        case 10:
            return add(x, inner(silu(apply_ss(norm(x)))));
        default:
            throw std::invalid_argument("invalid scale-shift variant id " +
                                        std::to_string(variant.id));
    }
}

// ----------------------------- WindowAttention ------------------------------

WindowAttention::WindowAttention(Params& p, const std::string& prefix,
                                 const AttentionConfig& cfg, int ctx_dim,
                                 Tensor shared_bias_table)
    : cfg_(cfg), bias_table_(std::move(shared_bias_table)) {
    int64_t C = cfg.channels();
    wq_ = p.weight(prefix + ".wq", C, C);
    bq_ = p.zeros(prefix + ".bq", {C});
    wk_ = p.weight(prefix + ".wk", C, C);
    bk_ = p.zeros(prefix + ".bk", {C});
    wv_ = p.weight(prefix + ".wv", C, C);
    bv_ = p.zeros(prefix + ".bv", {C});
    wkc_ = p.weight(prefix + ".wkc", ctx_dim, C);
    bkc_ = p.zeros(prefix + ".bkc", {C});
    wvc_ = p.weight(prefix + ".wvc", ctx_dim, C);
    bvc_ = p.zeros(prefix + ".bvc", {C});
    wo_ = p.weight(prefix + ".wo", C, C);
    bo_ = p.zeros(prefix + ".bo", {C});
    if (cfg.use_relative_bias) rel_index_ = relative_position_index(cfg.window);
}

Tensor WindowAttention::forward(const Tensor& x_windows, const ContextBundle& ctx,
                                const Tensor& mask, int64_t batch) const {
    int64_t N = x_windows.dim(0), L = x_windows.dim(1), C = x_windows.dim(2);
    if (C != cfg_.channels())
        throw ShapeError("window attention: C=" + std::to_string(C) + " != heads*head_dim");
    int64_t h = cfg_.num_heads, d = cfg_.head_dim;
    int64_t nW = N / batch;
    float att_scale = 1.0f / std::sqrt(static_cast<float>(d));

    auto heads_first = [&](const Tensor& t, int64_t rows) {
        return permute(reshape(t, {rows, L, h, d}), {0, 2, 1, 3});
    };
    Tensor q = heads_first(linear(x_windows, wq_, bq_), N);  // [N,h,L,d]
    Tensor k = heads_first(linear(x_windows, wk_, bk_), N);
    Tensor v = heads_first(linear(x_windows, wv_, bv_), N);

    Tensor attn = mul_scalar(matmul(q, k, true), att_scale);  // [N,h,L,L]
    if (cfg_.use_relative_bias && bias_table_.defined()) {
        Tensor bias = permute(reshape(gather_rows(bias_table_, rel_index_), {L, L, h}),
                              {2, 0, 1});  // [h,L,L]
        attn = add(attn, bias);
    }
    bool five_d = false;
    if (mask.defined()) {
        attn = add(reshape(attn, {batch, nW, h, L, L}),
                   reshape(mask, {mask.dim(0), 1, mask.dim(1), mask.dim(2)}));
        five_d = true;
    }

    Tensor out;
    if (!ctx.empty()) {
        if (!five_d) attn = reshape(attn, {batch, nW, h, L, L});
        int64_t Lc = ctx.len();
        Tensor kc = reshape(permute(reshape(linear(ctx.tokens, wkc_, bkc_), {batch, Lc, h, d}),
                                    {0, 2, 1, 3}),
                            {batch, 1, h, Lc, d});
        Tensor vc = reshape(permute(reshape(linear(ctx.tokens, wvc_, bvc_), {batch, Lc, h, d}),
                                    {0, 2, 1, 3}),
                            {batch, 1, h, Lc, d});
        Tensor q5 = reshape(q, {batch, nW, h, L, d});
        Tensor attn_c = mul_scalar(matmul(q5, kc, true), att_scale);  // [B,nW,h,L,Lc]
        Tensor full = concat({attn, attn_c}, 4);
        Tensor weights = softmax(full, -1);
        Tensor v5 = reshape(v, {batch, nW, h, L, d});
        Tensor vcb = broadcast_to(vc, {batch, nW, h, Lc, d});
        Tensor vfull = concat({v5, vcb}, 3);  // [B,nW,h,L+Lc,d]
        out = reshape(matmul(weights, vfull), {N, h, L, d});
    } else {
        if (five_d) attn = reshape(attn, {N, h, L, L});
        Tensor weights = softmax(attn, -1);
        out = matmul(weights, v);  // [N,h,L,d]
    }
    out = reshape(permute(out, {0, 2, 1, 3}), {N, L, C});
    return linear(out, wo_, bo_);
}

// ----------------------------- CrossAttention -------------------------------

CrossAttention::CrossAttention(Params& p, const std::string& prefix, const AttentionConfig& cfg,
                               int ctx_dim)
    : cfg_(cfg) {
    int64_t C = cfg.channels();
    norm1_g_ = p.ones(prefix + ".norm1.g", {C});
    norm1_b_ = p.zeros(prefix + ".norm1.b", {C});
    norm2_g_ = p.ones(prefix + ".norm2.g", {C});
    norm2_b_ = p.zeros(prefix + ".norm2.b", {C});
    wq_ = p.weight(prefix + ".wq", C, C);
    bq_ = p.zeros(prefix + ".bq", {C});
    wk_ = p.weight(prefix + ".wk", ctx_dim, C);
    bk_ = p.zeros(prefix + ".bk", {C});
    wv_ = p.weight(prefix + ".wv", ctx_dim, C);
    bv_ = p.zeros(prefix + ".bv", {C});
    wo_ = p.weight(prefix + ".wo", C, C);
    bo_ = p.zeros(prefix + ".bo", {C});
    int64_t hidden = static_cast<int64_t>(cfg.mlp_ratio_cross) * C;
    mlp_w1_ = p.weight(prefix + ".mlp.w1", C, hidden);
    mlp_b1_ = p.zeros(prefix + ".mlp.b1", {hidden});
    mlp_w2_ = p.weight(prefix + ".mlp.w2", hidden, C);
    mlp_b2_ = p.zeros(prefix + ".mlp.b2", {C});
}

Tensor CrossAttention::forward(const Tensor& x, const ContextBundle& ctx) const {
    int64_t B = x.dim(0), L = x.dim(1), C = x.dim(2);
    int64_t h = cfg_.num_heads, d = cfg_.head_dim;
    int64_t Lc = ctx.len();
    float att_scale = 1.0f / std::sqrt(static_cast<float>(d));

    Tensor xn = layer_norm(x, norm1_g_, norm1_b_);
    Tensor q = permute(reshape(linear(xn, wq_, bq_), {B, L, h, d}), {0, 2, 1, 3});
    Tensor k = permute(reshape(linear(ctx.tokens, wk_, bk_), {B, Lc, h, d}), {0, 2, 1, 3});
    Tensor v = permute(reshape(linear(ctx.tokens, wv_, bv_), {B, Lc, h, d}), {0, 2, 1, 3});
    Tensor weights = softmax(mul_scalar(matmul(q, k, true), att_scale), -1);
    Tensor out = reshape(permute(matmul(weights, v), {0, 2, 1, 3}), {B, L, C});
    Tensor y = add(x, linear(out, wo_, bo_));

    Tensor m = linear(gelu(linear(layer_norm(y, norm2_g_, norm2_b_), mlp_w1_, mlp_b1_)),
                      mlp_w2_, mlp_b2_);
    return add(y, m);
}

// ------------------------------- SwinBlock ----------------------------------

SwinBlock::SwinBlock(Params& p, const std::string& prefix, const AttentionConfig& cfg,
                     int ctx_dim, ScaleShiftVariant variant, bool shifted, bool with_cross,
                     Tensor shared_bias_table)
    : cfg_(cfg), variant_(variant), shifted_(shifted) {
    if (variant.id < 1 || variant.id > 10)
        throw std::invalid_argument("invalid scale-shift variant id " +
                                    std::to_string(variant.id));
    int64_t C = cfg.channels();
    ss_w1_ = p.weight(prefix + ".ss.w1", ctx_dim, ctx_dim);
    ss_b1_ = p.zeros(prefix + ".ss.b1", {ctx_dim});
    ss_w2_ = p.weight(prefix + ".ss.w2", ctx_dim, 2 * C);
    ss_b2_ = p.zeros(prefix + ".ss.b2", {2 * C});
    norms_.gamma = p.ones(prefix + ".norm.g", {C});
    norms_.beta = p.zeros(prefix + ".norm.b", {C});
    if (variant.id == 6) {
        norms_.gamma2 = p.ones(prefix + ".norm2x.g", {C});
        norms_.beta2 = p.zeros(prefix + ".norm2x.b", {C});
    }
    mlp_norm_g_ = p.ones(prefix + ".mlpnorm.g", {C});
    mlp_norm_b_ = p.zeros(prefix + ".mlpnorm.b", {C});
    int64_t hidden = static_cast<int64_t>(cfg.mlp_ratio_self) * C;
    mlp_w1_ = p.weight(prefix + ".mlp.w1", C, hidden);
    mlp_b1_ = p.zeros(prefix + ".mlp.b1", {hidden});
    mlp_w2_ = p.weight(prefix + ".mlp.w2", hidden, C);
    mlp_b2_ = p.zeros(prefix + ".mlp.b2", {C});
    attn_ = std::make_unique<WindowAttention>(p, prefix + ".attn", cfg, ctx_dim,
                                              std::move(shared_bias_table));
    if (with_cross)
        cross_ = std::make_unique<CrossAttention>(p, prefix + ".cross", cfg, ctx_dim);
}

Tensor SwinBlock::forward(const Tensor& x, const ContextBundle& ctx) const {
    int64_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    int win = cfg_.window;
    if (H % win != 0 || W % win != 0)
        throw ShapeError("swin block: spatial dims not divisible by window");
    int shift = shifted_ ? win / 2 : 0;

    Tensor sc, sh;
    if (ctx.cond.defined()) {
        Tensor hc = silu(linear(ctx.cond, ss_w1_, ss_b1_));
        Tensor ss = linear(hc, ss_w2_, ss_b2_);  // [B, 2C]
        sc = slice(ss, 1, 0, C);
        sh = slice(ss, 1, C, 2 * C);
    } else {
        sc = Tensor::zeros({C});
        sh = Tensor::zeros({C});
    }

    auto inner = [&](const Tensor& hin) {
        Tensor h2 = shift > 0 ? cyclic_shift(hin, -shift, -shift) : hin;
        Tensor mask = shift > 0 ? make_shift_mask(H, W, win, shift) : Tensor();
        Tensor out_w = attn_->forward(window_partition(h2, win), ctx, mask, B);
        Tensor o = window_reverse(out_w, win, B, H, W);
        if (shift > 0) o = cyclic_shift(o, shift, shift);
        return o;
    };

    Tensor y = scale_shift_apply(x, sc, sh, variant_, inner, norms_);

    Tensor pre = layer_norm(y, mlp_norm_g_, mlp_norm_b_);
    if (variant_.id == 8 || variant_.id == 9) {
        // Norm+scale-shift+GeLU replaces the plain LN at the MLP site too
        Tensor scb = broadcast_cond(sc, pre);
        Tensor shb = broadcast_cond(sh, pre);
        pre = gelu(add(mul(pre, add_scalar(scb, 1.0f)), shb));
    }
    Tensor m = linear(gelu(linear(pre, mlp_w1_, mlp_b1_)), mlp_w2_, mlp_b2_);
    y = add(y, m);

    if (cross_) {
        Tensor flat = reshape(y, {B, H * W, C});
        y = reshape(cross_->forward(flat, ctx), {B, H, W, C});
    }
    return y;
}

}  // namespace tecswin
