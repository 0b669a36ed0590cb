#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "safepatch/concepts.hpp"
#include "safepatch/dataset.hpp"

namespace safepatch {

// Seam where the full-scale pipeline calls an LLM: maps unsafe prompts to
// candidate safe prompts and prompts to safety conditions.
class RewriterClient {
public:
    virtual ~RewriterClient() = default;
    virtual std::vector<PromptTokens> rewrite(const PromptTokens& prompt, int k, Rng& rng) = 0;
    virtual SafetyCondition condition(const PromptTokens& prompt) = 0;
};

// Deterministic rule-table client: substitutes unsafe subject tokens with
// their safe counterparts, preserving every other token; extra candidates
// vary one filler token.
class RuleRewriter : public RewriterClient {
public:
    std::vector<PromptTokens> rewrite(const PromptTokens& prompt, int k, Rng& rng) override;
    SafetyCondition condition(const PromptTokens& prompt) override;
};

// Client backed by an external process speaking the line protocol on its
// standard streams:
//   "REWRITE <k> <tokens...>\n"  -> "OK <cand>|<cand>|...\n"
//   "CONDITION <tokens...>\n"    -> "OK <tokens...>\n"
//   any failure                  -> "ERR <class> <message>\n"
class ExternalRewriter : public RewriterClient {
public:
    explicit ExternalRewriter(const std::string& command);
    ~ExternalRewriter() override;
    std::vector<PromptTokens> rewrite(const PromptTokens& prompt, int k, Rng& rng) override;
    SafetyCondition condition(const PromptTokens& prompt) override;

private:
    std::string roundtrip(const std::string& request);
    struct Proc;
    std::unique_ptr<Proc> proc_;
};

// Candidate-image source; the default renders the prompt's pattern, the
// model-backed variant samples a trained base model.
using ImageBackend = std::function<Tensor(const PromptTokens& prompt, Rng& rng)>;
ImageBackend renderer_backend();

struct ImageCandidate {
    Tensor image;
    PromptTokens prompt;
};

// Discard candidates the classifier flags at the raised threshold; among the
// survivors return the index with the best alignment to its own prompt.
size_t select_safe_image(const std::vector<ImageCandidate>& candidates, double raised_threshold);

struct DataGenConfig {
    int candidates_k = 4;
    int images_per_candidate = 4;
    double raised_threshold = 0.3;
    int max_retries = 5;
};

struct Manifest {
    std::vector<std::string> lines;
    std::vector<std::string> warnings;
    std::string str() const;
};

struct PairDataset {
    std::vector<DatasetPair> records;
    Manifest manifest;
};

// The unsafe-prompt -> safe-image pipeline: rewrite, generate candidates,
// filter, select, attach the condition.
PairDataset build_pair_dataset(const std::vector<PromptTokens>& unsafe_prompts,
                               RewriterClient& client, const ImageBackend& backend, int size,
                               const DataGenConfig& cfg, Rng& rng);

std::vector<DatasetPair> build_benign_dataset(const std::vector<PromptTokens>& benign_prompts,
                                              int size, Rng& rng);

// Pre-training corpus for the base model: unsafe prompts paired with their
// own (unsafe) renders plus benign records, deterministically interleaved.
std::vector<DatasetPair> build_base_corpus(int size, Rng& rng);

} // namespace safepatch
