#include "safepatch/schedule.hpp"

#include "safepatch/error.hpp"

namespace safepatch {

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1)
        throw InvalidConfigError("make_schedule: steps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
        throw InvalidConfigError("make_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.steps = steps;
    s.betas.resize(static_cast<size_t>(steps));
    s.alphas.resize(static_cast<size_t>(steps));
    s.alpha_bars.resize(static_cast<size_t>(steps));
    double bar = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        s.betas[static_cast<size_t>(i)] = beta;
        s.alphas[static_cast<size_t>(i)] = 1.0 - beta;
        bar *= 1.0 - beta;
        s.alpha_bars[static_cast<size_t>(i)] = bar;
    }
    return s;
}

} // namespace safepatch
