#pragma once

#include <functional>
#include <span>

#include "safepatch/rng.hpp"
#include "safepatch/tensor.hpp"

namespace safepatch {

// Central finite-difference comparison against the tape gradient. f must be
// a deterministic scalar-producing forward pass over the given parameters.
// Samples up to max_coords coordinates per parameter and returns the maximum
// of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|). The finite-difference side
// never touches the tape, so it is an independent oracle.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor* const> params,
                  double h, int max_coords, Rng& rng);

// Same check with a total coordinate budget drawn across all parameters,
// weighted by parameter size.
double grad_check_sampled(const std::function<Tensor()>& f, std::span<Tensor* const> params,
                          double h, int total_coords, Rng& rng);

} // namespace safepatch
