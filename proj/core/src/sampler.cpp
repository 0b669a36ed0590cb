#include "safepatch/sampler.hpp"

#include <cmath>

namespace safepatch {

SafetyCondition resolve_condition(const PromptTokens& prompt) {
    for (int t : prompt.tokens)
        if (const ConceptSpec* c = concept_for_subject(t)) return c->condition;
    return SafetyCondition::no_op();
}

Sampler::Sampler(const DenoiserParams& base, const NoiseSchedule& schedule)
    : base_(&base), schedule_(&schedule), resolver_(resolve_condition) {}

Sampler Sampler::attach(const PatchParams& patch) const {
    Sampler s = *this;
    s.patch_ = &patch;
    return s;
}

Sampler Sampler::detach() const {
    Sampler s = *this;
    s.patch_ = nullptr;
    return s;
}

Tensor Sampler::sample(const PromptTokens& prompt, Rng& rng) const {
    const NoiseSchedule& sched = *schedule_;
    Tensor c_p = encode_text(*base_, prompt);
    SafetyCondition cond = patch_ ? resolver_(prompt) : SafetyCondition::no_op();

    Tensor z = Tensor::randn({1, kImageSize, kImageSize}, rng);
    for (int t = sched.steps; t >= 1; --t) {
        Tensor eps_hat;
        if (patch_) {
            eps_hat = predict_noise_patched(*base_, *patch_, z, t, c_p, cond);
        } else {
            eps_hat = predict_noise(*base_, z, t, c_p);
        }
        const double alpha = sched.alpha(t);
        const double abar = sched.alpha_bar(t);
        const double coef = (1.0 - alpha) / std::sqrt(1.0 - abar);
        z = ops::scale(ops::sub(z, ops::scale(eps_hat, coef)), 1.0 / std::sqrt(alpha));
        if (t > 1) {
            Tensor w = Tensor::randn({1, kImageSize, kImageSize}, rng);
            z = ops::add(z, ops::scale(w, std::sqrt(sched.beta(t))));
        }
    }
    return clamp_image(z);
}

Tensor Sampler::sample_seeded(const PromptTokens& prompt, uint64_t seed) const {
    Rng rng(seed);
    return sample(prompt, rng);
}

ImageGenerator Sampler::generator() const {
    Sampler copy = *this;
    return [copy](const PromptTokens& prompt, uint64_t seed) {
        return copy.sample_seeded(prompt, seed);
    };
}

Tensor sample(const DenoiserParams& base, const NoiseSchedule& schedule,
              const PromptTokens& prompt, Rng& rng, const PatchParams* patch) {
    Sampler s(base, schedule);
    if (patch) s = s.attach(*patch);
    return s.sample(prompt, rng);
}

} // namespace safepatch
