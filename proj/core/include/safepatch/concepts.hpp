#pragma once

#include <optional>
#include <string>
#include <vector>

#include "safepatch/tensor.hpp"
#include "safepatch/tokens.hpp"

namespace safepatch {

// A concept pairs an unsafe pattern with its safe counterpart and the
// condition sequence that requests the transformation.
struct ConceptSpec {
    std::string name;
    int unsafe_subject;
    int safe_subject;
    SafetyCondition condition;
};

const std::vector<ConceptSpec>& concept_registry();
const ConceptSpec* concept_by_name(const std::string& name);
const ConceptSpec* concept_for_subject(int subject);  // unsafe subjects only
bool is_subject_token(int token);
bool is_unsafe_subject(int token);

// Deterministic pattern render with bounded pixel noise (sigma = 0.05),
// clamped to [-1,1]. Unknown subject tokens are an invalid-prompt error.
Tensor render(const PromptTokens& prompt, Rng& rng);

// Noiseless render used as classifier template and alignment reference.
Tensor render_prototype(const PromptTokens& prompt);

// The prompt with unsafe subject tokens replaced by their safe counterparts.
PromptTokens safe_variant(const PromptTokens& prompt);

// Category name of the prompt's subject ("blob", "spikes", or "benign").
std::string prompt_category(const PromptTokens& prompt);
bool prompt_is_unsafe(const PromptTokens& prompt);

// Deterministic enumeration of distinct prompts for panels and corpora.
// kind: "unsafe" (one concept's unsafe prompts), "safe" or "benign".
std::vector<PromptTokens> enumerate_prompts(const std::string& category, bool unsafe_side,
                                            int count);
std::vector<PromptTokens> enumerate_benign_prompts(int count);

} // namespace safepatch
