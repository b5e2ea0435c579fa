#include <benchmark/benchmark.h>

#include "tecswin/diffusion.hpp"
#include "tecswin/model.hpp"
#include "tecswin/schedule.hpp"
#include "tecswin/toydata.hpp"

using namespace tecswin;

static void BM_Matmul(benchmark::State& state) {
    int64_t n = state.range(0);
    Rng rng(1);
    Tensor a = Tensor::randn({n, n}, rng);
    Tensor b = Tensor::randn({n, n}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

static void BM_WindowAttention(benchmark::State& state) {
    AttentionConfig cfg;
    cfg.window = 4;
    cfg.num_heads = 4;
    cfg.head_dim = 16;
    Params p(1);
    Tensor bias = p.randn("bias", {49, 4}, 0.02f);
    WindowAttention attn(p, "wa", cfg, 32, bias);
    Rng rng(2);
    Tensor x = Tensor::randn({8, 16, cfg.channels()}, rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(attn.forward(x, ContextBundle{}, Tensor(), 2).data().data());
}
BENCHMARK(BM_WindowAttention);

static void BM_ToyUNetForward(benchmark::State& state) {
    ModelConfig cfg = ModelConfig::toy();
    TecSwinModel model(cfg, 1);
    model.set_prompts({toy_class_prompt(0)});
    Rng rng(3);
    Tensor x = Tensor::randn({1, cfg.image_size, cfg.image_size, 3}, rng);
    NoGradGuard ng;
    for (auto _ : state)
        benchmark::DoNotOptimize(model.forward(x, {500}, {false}).data().data());
}
BENCHMARK(BM_ToyUNetForward);

static void BM_ToyTrainStep(benchmark::State& state) {
    ModelConfig cfg = ModelConfig::toy();
    TecSwinModel model(cfg, 1);
    Rng rng(4);
    auto raw = make_toy_dataset(1, cfg.image_size, rng);
    std::vector<Tensor> imgs;
    std::vector<Tensor> embs;
    for (auto& [img, cls] : raw) {
        imgs.push_back(reshape(img, {1, cfg.image_size, cfg.image_size, 3}));
        embs.push_back(model.encode_prompt(toy_class_prompt(cls)));
    }
    Tensor batch = concat(imgs, 0);
    NoiseSchedule sch = NoiseSchedule::cosine(1000);
    Rng loss_rng(5);
    for (auto _ : state) {
        model.params().zero_grad();
        model.set_text_embeddings(embs);
        backward(eps_loss(model, batch, sch, 0.2, loss_rng));
    }
}
BENCHMARK(BM_ToyTrainStep);

static void BM_SamplingStep(benchmark::State& state) {
    ModelConfig cfg = ModelConfig::toy();
    TecSwinModel model(cfg, 1);
    model.set_prompts({toy_class_prompt(1)});
    NoiseSchedule sch = NoiseSchedule::cosine(1000);
    Rng rng(6);
    Tensor x = Tensor::randn({1, cfg.image_size, cfg.image_size, 3}, rng);
    NoGradGuard ng;
    for (auto _ : state) {
        Tensor eps_c = model.forward(x, {500}, {false});
        Tensor eps_u = model.forward(x, {500}, {true});
        benchmark::DoNotOptimize(
            sch.ddpm_step(x, 500, 450, guided_eps(eps_c, eps_u, 1.14), rng).data().data());
    }
}
BENCHMARK(BM_SamplingStep);

BENCHMARK_MAIN();
