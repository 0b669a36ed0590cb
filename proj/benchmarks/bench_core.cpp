#include <benchmark/benchmark.h>

#include <array>

#include "safepatch/datagen.hpp"
#include "safepatch/sampler.hpp"
#include "safepatch/tape.hpp"
#include "safepatch/train.hpp"

using namespace safepatch;

namespace {

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    Tensor x = Tensor::randn({32, 8, 8}, rng);
    Tensor k = Tensor::randn({16, 32, 3, 3}, rng);
    Tensor b = Tensor::randn({16}, rng);
    for (auto _ : state) {
        Tensor y = ops::conv2d(x, k, b, 1, 1);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(2);
    Tensor x = Tensor::randn({32, 8, 8}, rng);
    Tensor k = Tensor::randn({16, 32, 3, 3}, rng);
    Tensor b = Tensor::randn({16}, rng);
    Tensor tgt = Tensor::randn({16, 8, 8}, rng);
    x.set_trainable(true);
    k.set_trainable(true);
    b.set_trainable(true);
    std::array<Tensor*, 3> params{&x, &k, &b};
    for (auto _ : state) {
        Tape tape;
        Tensor loss = ops::mse(ops::conv2d(x, k, b, 1, 1), tgt);
        tape.backward(loss, params);
        benchmark::DoNotOptimize(k.grad_data());
    }
}
BENCHMARK(BM_Conv2dBackward);

void BM_Matmul(benchmark::State& state) {
    Rng rng(3);
    const int64_t n = state.range(0);
    Tensor a = Tensor::randn({n, n}, rng);
    Tensor b = Tensor::randn({n, n}, rng);
    for (auto _ : state) {
        Tensor c = ops::matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

void BM_PredictNoise(benchmark::State& state) {
    Rng rng(4);
    DenoiserParams base = init_denoiser(rng);
    Tensor zt = Tensor::randn({1, 16, 16}, rng);
    Tensor cp = encode_text(base, PromptTokens({1, 9, 20}));
    for (auto _ : state) {
        Tensor eps = predict_noise(base, zt, 50, cp);
        benchmark::DoNotOptimize(eps.data());
    }
}
BENCHMARK(BM_PredictNoise);

void BM_PatchForward(benchmark::State& state) {
    Rng rng(5);
    DenoiserParams base = init_denoiser(rng);
    PatchParams patch = init_patch(base, rng, "blob");
    Tensor zt = Tensor::randn({1, 16, 16}, rng);
    Tensor cp = encode_text(base, PromptTokens({1, 9, 20}));
    SafetyCondition cond = concept_by_name("blob")->condition;
    for (auto _ : state) {
        Injections inj = patch_forward(patch, base, zt, 50, cp, cond);
        benchmark::DoNotOptimize(inj.mid.data());
    }
}
BENCHMARK(BM_PatchForward);

void BM_SampleImage(benchmark::State& state) {
    Rng rng(6);
    DenoiserParams base = init_denoiser(rng);
    NoiseSchedule sched = make_schedule(static_cast<int>(state.range(0)), 1e-4, 0.02);
    Sampler sampler(base, sched);
    PromptTokens prompt({1, 9, 20});
    uint64_t seed = 0;
    for (auto _ : state) {
        Tensor img = sampler.sample_seeded(prompt, seed++);
        benchmark::DoNotOptimize(img.data());
    }
}
BENCHMARK(BM_SampleImage)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_PatchTrainStep(benchmark::State& state) {
    Rng rng(7);
    DenoiserParams base = init_denoiser(rng);
    NoiseSchedule sched = make_schedule(100, 1e-4, 0.02);
    RuleRewriter client;
    Rng data_rng(8);
    PairDataset pairs = build_pair_dataset(enumerate_prompts("blob", true, 8), client,
                                           renderer_backend(), 8, {}, data_rng);
    Rng patch_rng(9);
    PatchParams patch = init_patch(base, patch_rng, "blob");
    patch.set_trainable(true);
    std::vector<Tensor*> params = patch.tensors();
    AdamState opt = AdamState::init(params);
    Rng noise(10);
    for (auto _ : state) {
        Tape tape;
        Tensor loss;
        for (int bi = 0; bi < 4; ++bi) {
            const DatasetPair& rec = pairs.records[static_cast<size_t>(bi) % pairs.records.size()];
            const int t = 1 + static_cast<int>(noise.next_below(100));
            Tensor eps = Tensor::randn({1, 16, 16}, noise);
            Tensor zt = add_noise(rec.image, t, eps, sched);
            Tensor cp = encode_text(base, rec.prompt);
            Tensor eps_hat = predict_noise_patched(base, patch, zt, t, cp, rec.condition);
            Tensor l = ops::mse(eps, eps_hat);
            loss = loss.defined() ? ops::add(loss, l) : l;
        }
        loss = ops::scale(loss, 0.25);
        tape.backward(loss, params);
        adam_step(params, opt, {});
        benchmark::DoNotOptimize(patch.zero_in.w.data());
    }
}
BENCHMARK(BM_PatchTrainStep)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
