#include "safepatch/train.hpp"

#include <algorithm>

#include "safepatch/tape.hpp"

namespace safepatch {

namespace {

std::vector<size_t> subset_indices(std::span<const DatasetPair> dataset, bool benign) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < dataset.size(); ++i)
        if (dataset[i].is_benign == benign) idx.push_back(i);
    return idx;
}

} // namespace

std::vector<const DatasetPair*> sample_batch(std::span<const DatasetPair> dataset,
                                             const TrainConfig& config, int64_t step) {
    if (dataset.empty())
        throw InvalidConfigError("sample_batch: dataset is empty");
    if (config.benign_mix_ratio < 0.0 || config.benign_mix_ratio > 1.0)
        throw InvalidConfigError("sample_batch: benign_mix_ratio outside [0,1]");

    std::vector<size_t> benign_idx = subset_indices(dataset, true);
    std::vector<size_t> unsafe_idx = subset_indices(dataset, false);
    if (config.benign_mix_ratio > 0.0 && benign_idx.empty())
        throw InvalidConfigError("sample_batch: benign_mix_ratio > 0 but no benign records");
    if (config.benign_mix_ratio < 1.0 && unsafe_idx.empty())
        throw InvalidConfigError("sample_batch: benign_mix_ratio < 1 but no unsafe records");

    Rng rng(rng_word(config.seed, static_cast<uint64_t>(step), 0xBA7C4), 0);
    std::vector<const DatasetPair*> batch;
    batch.reserve(static_cast<size_t>(config.batch_size));
    for (int i = 0; i < config.batch_size; ++i) {
        const bool benign = rng.next_uniform() < config.benign_mix_ratio;
        const auto& pool = benign ? benign_idx : unsafe_idx;
        batch.push_back(&dataset[pool[rng.next_below(pool.size())]]);
    }
    return batch;
}

TrainLog train_patch(const DenoiserParams& base, PatchParams& patch,
                     std::span<const DatasetPair> dataset, const NoiseSchedule& schedule,
                     const TrainConfig& config, const EvalHook& eval_hook) {
    if (dataset.empty())
        throw InvalidConfigError("train_patch: dataset is empty");
    if (config.max_steps < 1 || config.batch_size < 1)
        throw InvalidConfigError("train_patch: bad step/batch config");
    auto& base_mut = const_cast<DenoiserParams&>(base);
    for (Tensor* t : base_mut.tensors())
        if (t->trainable())
            throw ContractError("train_patch: base model must be locked");

    patch.set_trainable(true);
    std::vector<Tensor*> params = patch.tensors();
    AdamState opt = AdamState::init(params);

    Rng root(config.seed);
    Rng held_rng = root.fork(0x45AD);
    const size_t held_n = std::min<size_t>(dataset.size(), 16);
    std::vector<int> held_t(held_n);
    std::vector<Tensor> held_eps(held_n);
    for (size_t i = 0; i < held_n; ++i) {
        held_t[i] = 1 + static_cast<int>(held_rng.next_below(static_cast<uint64_t>(schedule.steps)));
        held_eps[i] = Tensor::randn({1, kImageSize, kImageSize}, held_rng);
    }
    auto heldout_loss = [&]() {
        double acc = 0.0;
        for (size_t i = 0; i < held_n; ++i) {
            const DatasetPair& rec = dataset[i];
            Tensor z0 = encode_image(rec.image);
            Tensor zt = add_noise(z0, held_t[i], held_eps[i], schedule);
            Tensor cp = encode_text(base, rec.prompt);
            Tensor eps_hat = predict_noise_patched(base, patch, zt, held_t[i], cp, rec.condition);
            acc += ops::mse(held_eps[i], eps_hat).item();
        }
        return acc / static_cast<double>(held_n);
    };

    TrainLog log;
    log.first_heldout = heldout_loss();
    Rng noise_rng = root.fork(0x7E41);
    for (int64_t step = 0; step < config.max_steps; ++step) {
        std::vector<const DatasetPair*> batch = sample_batch(dataset, config, step);
        Tape tape;
        Tensor loss;
        for (const DatasetPair* rec : batch) {
            const int t = 1 + static_cast<int>(noise_rng.next_below(static_cast<uint64_t>(schedule.steps)));
            Tensor eps = Tensor::randn({1, kImageSize, kImageSize}, noise_rng);
            Tensor z0 = encode_image(rec->image);
            Tensor zt = add_noise(z0, t, eps, schedule);
            Tensor cp = encode_text(base, rec->prompt);
            Tensor eps_hat = predict_noise_patched(base, patch, zt, t, cp, rec->condition);
            Tensor l = ops::mse(eps, eps_hat);
            loss = loss.defined() ? ops::add(loss, l) : l;
        }
        loss = ops::scale(loss, 1.0 / config.batch_size);
        const double loss_val = loss.item();
        tape.backward(loss, params);
        adam_step(params, opt, config.adam);

        MetricPoint pt;
        pt.step = step;
        pt.loss = loss_val;
        const bool eval_now =
            eval_hook && config.eval_every > 0 &&
            ((step + 1) % config.eval_every == 0 || step + 1 == config.max_steps);
        if (eval_now) {
            pt.eval = eval_hook(step + 1, patch);
            pt.has_eval = true;
        }
        log.points.push_back(pt);
        if (pt.has_eval && config.stop_at_eval >= 0.0 && pt.eval <= config.stop_at_eval) break;
    }
    log.last_heldout = heldout_loss();
    patch.set_trainable(false);
    return log;
}

} // namespace safepatch
