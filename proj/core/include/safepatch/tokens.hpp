#pragma once

#include <string>
#include <vector>

#include "safepatch/error.hpp"

namespace safepatch {

inline constexpr int kPromptVocab = 32;
inline constexpr int kCondVocab = 32;
inline constexpr int kMaxPromptLen = 8;
inline constexpr int kImageSize = 16;
inline constexpr int kEmbedDim = 32;
inline constexpr int kTimeDim = 32;

// Prompt vocabulary layout. Subject tokens select a renderer pattern, size
// tokens set its scale, filler tokens are scene words the renderer ignores.
namespace tok {
inline constexpr int BLOB_BARE = 1;     // unsafe disc pattern
inline constexpr int BLOB_COVERED = 2;  // its safe counterpart
inline constexpr int SPIKES_SHARP = 3;  // unsafe cross pattern
inline constexpr int SPIKES_SOFT = 4;   // its safe counterpart
inline constexpr int STRIPES = 5;
inline constexpr int CHECKER = 6;
inline constexpr int CORNER_DOT = 7;
inline constexpr int SIZE_S = 8;
inline constexpr int SIZE_M = 9;
inline constexpr int SIZE_L = 10;
inline constexpr int FILLER_FIRST = 16;
inline constexpr int FILLER_LAST = 27;
} // namespace tok

struct PromptTokens {
    std::vector<int> tokens;

    PromptTokens() = default;
    explicit PromptTokens(std::vector<int> t) : tokens(std::move(t)) { validate(); }

    void validate() const {
        if (tokens.empty())
            throw InvalidTokenError("prompt: empty token sequence");
        if (tokens.size() > kMaxPromptLen)
            throw InvalidTokenError("prompt: longer than " + std::to_string(kMaxPromptLen));
        for (int t : tokens)
            if (t < 0 || t >= kPromptVocab)
                throw InvalidTokenError("prompt: token " + std::to_string(t) + " outside vocab");
    }

    bool operator==(const PromptTokens& o) const { return tokens == o.tokens; }
    std::string str() const;
};

// Safety condition over its own vocabulary. Token 0 alone is the reserved
// NO_OP sequence used for benign records.
struct SafetyCondition {
    std::vector<int> tokens;

    SafetyCondition() : tokens{0} {}
    explicit SafetyCondition(std::vector<int> t) : tokens(std::move(t)) { validate(); }

    static SafetyCondition no_op() { return SafetyCondition(); }
    bool is_no_op() const { return tokens.size() == 1 && tokens[0] == 0; }

    void validate() const {
        if (tokens.empty())
            throw InvalidTokenError("condition: empty token sequence");
        if (tokens.size() > kMaxPromptLen)
            throw InvalidTokenError("condition: longer than " + std::to_string(kMaxPromptLen));
        for (int t : tokens)
            if (t < 0 || t >= kCondVocab)
                throw InvalidTokenError("condition: token " + std::to_string(t) + " outside vocab");
    }

    bool operator==(const SafetyCondition& o) const { return tokens == o.tokens; }
    std::string str() const;
};

std::string tokens_str(const std::vector<int>& tokens);
std::vector<int> parse_token_list(const std::string& text);

} // namespace safepatch
