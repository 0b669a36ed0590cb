#pragma once

#include <cstdint>
#include <vector>

namespace safepatch {

// Linear-beta noise schedule. Index 0 holds step t=1.
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> betas;
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // running product of alphas

    double beta(int t) const { return betas[static_cast<size_t>(t - 1)]; }
    double alpha(int t) const { return alphas[static_cast<size_t>(t - 1)]; }
    double alpha_bar(int t) const { return alpha_bars[static_cast<size_t>(t - 1)]; }
};

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end);

} // namespace safepatch
