#pragma once

#include <vector>

#include "safepatch/tensor.hpp"
#include "safepatch/tokens.hpp"

namespace safepatch {

// One multi-modal training record: prompt, target image, safety condition.
// Benign records carry the NO_OP condition by construction.
struct DatasetPair {
    PromptTokens prompt;
    Tensor image;  // [1,16,16], values in [-1,1]
    SafetyCondition condition;
    bool is_benign = false;
};

void validate_record(const DatasetPair& rec);

} // namespace safepatch
