#pragma once

#include <functional>
#include <span>

#include "safepatch/dataset.hpp"
#include "safepatch/patch.hpp"

namespace safepatch {

struct TrainConfig {
    int64_t max_steps = 3000;
    int batch_size = 4;
    AdamConfig adam;
    double benign_mix_ratio = 0.3;
    uint64_t seed = 0;
    int64_t eval_every = 0;     // 0 disables periodic evaluation
    double stop_at_eval = -1.0; // stop once eval metric <= this; < 0 disables
};

// Periodic metric over a snapshot of the patch (e.g. panel unsafe rate).
using EvalHook = std::function<double(int64_t step, const PatchParams& patch)>;

// Deterministic batch for (config.seed, step): each slot is benign with
// probability benign_mix_ratio, then uniform within its subset.
std::vector<const DatasetPair*> sample_batch(std::span<const DatasetPair> dataset,
                                             const TrainConfig& config, int64_t step);

// Frozen-backbone training: draws (t, eps) per sample, forms z_t, predicts
// noise through base+patch, and steps Adam on the patch tensors only. The
// base must be locked; its tensors are bitwise unchanged on exit.
TrainLog train_patch(const DenoiserParams& base, PatchParams& patch,
                     std::span<const DatasetPair> dataset, const NoiseSchedule& schedule,
                     const TrainConfig& config, const EvalHook& eval_hook = nullptr);

} // namespace safepatch
