#include <doctest.h>

#include <cmath>

#include "tecswin/model.hpp"
#include "tecswin/unet.hpp"
#include "testutil.hpp"

using namespace tecswin;
using testutil::max_abs_diff;
using testutil::max_grad_error;

namespace {

ContextBundle make_ctx(const ModelConfig& cfg, Rng& rng, int64_t B) {
    ContextBundle ctx;
    int64_t Lc = cfg.ctx_tokens + 2;
    ctx.tokens = Tensor::randn({B, Lc, cfg.ctx_dim}, rng);
    ctx.pooled = Tensor::randn({B, cfg.ctx_dim}, rng);
    ctx.cond = Tensor::randn({B, cfg.ctx_dim}, rng);
    ctx.masked.assign(B, false);
    return ctx;
}

}  // namespace

TEST_CASE("patch merge halves resolution and doubles channels; expand inverts shape") {
    Rng rng(11);
    Params p(1);
    PatchMerge merge(p, "m", 8);
    PatchExpand expand(p, "e", 16);
    Tensor x = Tensor::randn({2, 8, 8, 8}, rng);
    Tensor merged = merge.forward(x);
    REQUIRE(merged.shape() == Shape{2, 4, 4, 16});
    Tensor back = expand.forward(merged);
    CHECK(back.shape() == x.shape());
}

TEST_CASE("skip fuse maps concat back to decoder width") {
    Rng rng(13);
    Params p(2);
    SkipFuse fuse(p, "f", 8);
    Tensor dec = Tensor::randn({2, 4, 4, 8}, rng);
    Tensor enc = Tensor::randn({2, 4, 4, 8}, rng);
    CHECK(fuse.forward(dec, enc).shape() == dec.shape());
}

TEST_CASE("unet forward preserves input shape across 5 configs") {
    std::vector<ModelConfig> configs;
    configs.push_back(ModelConfig::tiny());
    configs.push_back(ModelConfig::toy());

    ModelConfig c3 = ModelConfig::tiny();
    c3.image_size = 16;
    c3.window = 4;
    configs.push_back(c3);

    ModelConfig c4 = ModelConfig::tiny();
    c4.scale_shift_variant = 8;
    c4.base_channels = 12;
    c4.head_dim = 6;
    configs.push_back(c4);

    ModelConfig c5 = ModelConfig::toy();
    c5.depths = {2, 2};
    c5.scale_shift_variant = 1;
    c5.use_relative_bias = false;
    configs.push_back(c5);

    Rng rng(17);
    int idx = 0;
    for (const auto& cfg : configs) {
        CAPTURE(idx);
        Params p(100 + idx);
        UNet net(p, cfg);
        Tensor x = Tensor::randn({2, cfg.image_size, cfg.image_size, cfg.in_channels}, rng);
        ContextBundle ctx = make_ctx(cfg, rng, 2);
        Tensor y = net.forward(x, ctx);
        CHECK(y.shape() == x.shape());
        for (float v : y.data()) REQUIRE(std::isfinite(v));
        ++idx;
    }
}

TEST_CASE("unet rejects wrong input resolution") {
    ModelConfig cfg = ModelConfig::tiny();
    Params p(3);
    UNet net(p, cfg);
    Rng rng(19);
    Tensor bad = Tensor::randn({1, cfg.image_size * 2, cfg.image_size * 2, 3}, rng);
    ContextBundle ctx = make_ctx(cfg, rng, 1);
    CHECK_THROWS(net.forward(bad, ctx));
}

TEST_CASE("config validation catches bad geometry") {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.depths = {2};  // too few stages
    CHECK_THROWS(cfg.validate());

    ModelConfig odd = ModelConfig::tiny();
    odd.image_size = 12;  // not divisible by 2^(stages-1)
    CHECK_THROWS(odd.validate());

    ModelConfig baddim = ModelConfig::tiny();
    baddim.head_dim = 3;  // channels not divisible
    CHECK_THROWS(baddim.validate());

    ModelConfig odd_depth = ModelConfig::toy();
    odd_depth.depths = {3, 2, 2};  // shifted stage with odd depth
    CHECK_THROWS(odd_depth.validate());
}

TEST_CASE("per-stage window shrinks to the feature map and disables shifting") {
    ModelConfig cfg = ModelConfig::toy();  // image 16, window 4
    CHECK(cfg.stage_window(0) == 4);
    CHECK(cfg.stage_shifted(0));
    CHECK(cfg.stage_window(2) == 4);       // res 4 == window
    CHECK_FALSE(cfg.stage_shifted(2));     // window covers the map
}

TEST_CASE("paper-scale parameter count within 5% of 341M") {
    ModelConfig cfg = ModelConfig::paper_scale();
    Params p(7);
    UNet net(p, cfg);
    ContextAssembler ctx(p, "ctx", cfg.seq_len, cfg.enc_dim, cfg.ctx_tokens, cfg.ctx_dim);
    double count = static_cast<double>(p.count());
    CHECK(count > 341e6 * 0.95);
    CHECK(count < 341e6 * 1.05);
}

TEST_CASE("full tiny unet gradient check") {
    ModelConfig cfg = ModelConfig::tiny();
    Params p(23);
    UNet net(p, cfg);
    Rng rng(29);
    Tensor x = Tensor::randn({1, cfg.image_size, cfg.image_size, cfg.in_channels}, rng, 0.5f);
    ContextBundle ctx = make_ctx(cfg, rng, 1);
    Tensor target = Tensor::randn(x.shape(), rng);

    std::vector<Tensor> leaves;
    for (auto& [_, t] : p.all()) leaves.push_back(t);
    auto loss = [&] { return mse(net.forward(x, ctx), target); };
    CHECK(max_grad_error(loss, leaves, 1e-3, 2) < 1e-2);
}

TEST_CASE("unet forward is deterministic") {
    ModelConfig cfg = ModelConfig::tiny();
    auto run = [&] {
        Params p(31);
        UNet net(p, cfg);
        Rng rng(37);
        Tensor x = Tensor::randn({1, cfg.image_size, cfg.image_size, 3}, rng);
        ContextBundle ctx = make_ctx(cfg, rng, 1);
        return net.forward(x, ctx).data();
    };
    CHECK(run() == run());
}
