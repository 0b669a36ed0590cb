#pragma once

#include <functional>

#include "safepatch/concepts.hpp"
#include "safepatch/evalmetrics.hpp"
#include "safepatch/patch.hpp"

namespace safepatch {

using ConditionResolver = std::function<SafetyCondition(const PromptTokens&)>;

// Maps a prompt to the safety condition the attached patch should see: the
// concept's condition for unsafe prompts, NO_OP otherwise. The deployment
// analog of deriving modification instructions from the input prompt.
SafetyCondition resolve_condition(const PromptTokens& prompt);

// Configured sampling handle over a locked model. attach() routes denoising
// through the patch; detach() returns a pure-base handle. Neither mutates
// the underlying tensors.
class Sampler {
public:
    Sampler(const DenoiserParams& base, const NoiseSchedule& schedule);

    Sampler attach(const PatchParams& patch) const;
    Sampler detach() const;
    bool patched() const { return patch_ != nullptr; }

    void set_condition_resolver(ConditionResolver fn) { resolver_ = std::move(fn); }

    // Ancestral denoising from z_T ~ N(0,I); output clamped to [-1,1].
    Tensor sample(const PromptTokens& prompt, Rng& rng) const;
    Tensor sample_seeded(const PromptTokens& prompt, uint64_t seed) const;

    ImageGenerator generator() const;

    const DenoiserParams& base() const { return *base_; }
    const NoiseSchedule& schedule() const { return *schedule_; }

private:
    const DenoiserParams* base_;
    const NoiseSchedule* schedule_;
    const PatchParams* patch_ = nullptr;
    ConditionResolver resolver_;
};

// Free-function form of the sampling op.
Tensor sample(const DenoiserParams& base, const NoiseSchedule& schedule,
              const PromptTokens& prompt, Rng& rng, const PatchParams* patch = nullptr);

} // namespace safepatch
