#pragma once

#include <span>
#include <vector>

#include "safepatch/tensor.hpp"

namespace safepatch {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers, one pair per parameter, in parameter order.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t step = 0;

    static AdamState init(std::span<Tensor* const> params);
};

// Standard Adam with bias correction, reading each param's deposited grad.
// Non-finite gradients abort with a diagnostics error before any write.
void adam_step(std::span<Tensor* const> params, AdamState& state, const AdamConfig& cfg);

} // namespace safepatch
