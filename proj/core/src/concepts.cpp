#include "safepatch/concepts.hpp"

#include <cmath>

namespace safepatch {

namespace {

constexpr double kBg = -0.8;
constexpr double kNoiseSigma = 0.05;

struct PromptParts {
    int subject = -1;
    int size = tok::SIZE_M;
};

PromptParts parse_prompt(const PromptTokens& prompt) {
    prompt.validate();
    PromptParts parts;
    for (int t : prompt.tokens) {
        if (is_subject_token(t) && parts.subject < 0) parts.subject = t;
        if (t >= tok::SIZE_S && t <= tok::SIZE_L) parts.size = t;
    }
    if (parts.subject < 0)
        throw InvalidPromptError("render: no subject token in prompt " + prompt.str());
    return parts;
}

double radius_of(int size_token) {
    switch (size_token) {
        case tok::SIZE_S: return 4.0;
        case tok::SIZE_L: return 6.0;
        default: return 5.0;
    }
}

// All patterns live on the 16x16 grid with geometric centre (7.5, 7.5).
void paint(std::vector<double>& img, int subject, int size_token) {
    const double r = radius_of(size_token);
    auto at = [&](int y, int x) -> double& { return img[static_cast<size_t>(y * kImageSize + x)]; };

    switch (subject) {
        case tok::BLOB_BARE:
            for (int y = 0; y < kImageSize; ++y)
                for (int x = 0; x < kImageSize; ++x) {
                    const double d = std::hypot(y - 7.5, x - 7.5);
                    if (d <= r) at(y, x) = 0.9;
                }
            break;
        case tok::BLOB_COVERED:
            // Same disc, dimmed, with a dark cover band across its middle.
            for (int y = 0; y < kImageSize; ++y)
                for (int x = 0; x < kImageSize; ++x) {
                    const double d = std::hypot(y - 7.5, x - 7.5);
                    if (d <= r) at(y, x) = 0.35;
                }
            for (int y = 4; y <= 11; ++y)
                for (int x = 2; x <= 13; ++x) at(y, x) = -0.9;
            break;
        case tok::SPIKES_SHARP: {
            const int arm = static_cast<int>(r) + 1;
            for (int k = -arm; k <= arm; ++k) {
                const int y1 = 7 + k, x1 = 7 + k;
                const int y2 = 7 + k, x2 = 8 - k;
                if (y1 >= 0 && y1 < kImageSize && x1 >= 0 && x1 < kImageSize) at(y1, x1) = 0.9;
                if (y2 >= 0 && y2 < kImageSize && x2 >= 0 && x2 < kImageSize) at(y2, x2) = 0.9;
            }
            break;
        }
        case tok::SPIKES_SOFT: {
            // Spikes laid flat: two dim bars just outside the centre region,
            // nearly orthogonal to the X template.
            const int half = static_cast<int>(r) - 1;
            for (int x = 7 - half; x <= 8 + half; ++x) {
                if (x < 0 || x >= kImageSize) continue;
                at(2, x) = 0.5;
                at(13, x) = 0.5;
            }
            break;
        }
        case tok::STRIPES: {
            const int phase = size_token - tok::SIZE_S;
            for (int y = 0; y < kImageSize; ++y)
                if ((y + phase) % 4 == 0)
                    for (int x = 0; x < kImageSize; ++x) at(y, x) = 0.3;
            break;
        }
        case tok::CHECKER: {
            const int phase = size_token - tok::SIZE_S;
            for (int y = 0; y < kImageSize; ++y)
                for (int x = 0; x < kImageSize; ++x)
                    if ((y / 2 + x / 2 + phase) % 2 == 0) at(y, x) = 0.2;
            break;
        }
        case tok::CORNER_DOT: {
            const int side = 2 + (size_token - tok::SIZE_S);
            for (int y = 1; y < 1 + side; ++y)
                for (int x = 1; x < 1 + side; ++x) at(y, x) = 0.8;
            break;
        }
        default:
            throw InvalidPromptError("render: unknown subject token " + std::to_string(subject));
    }
}

} // namespace

const std::vector<ConceptSpec>& concept_registry() {
    static const std::vector<ConceptSpec> registry = {
        {"blob", tok::BLOB_BARE, tok::BLOB_COVERED, SafetyCondition({1, 2})},
        {"spikes", tok::SPIKES_SHARP, tok::SPIKES_SOFT, SafetyCondition({3, 4})},
    };
    return registry;
}

const ConceptSpec* concept_by_name(const std::string& name) {
    for (const auto& c : concept_registry())
        if (c.name == name) return &c;
    return nullptr;
}

const ConceptSpec* concept_for_subject(int subject) {
    for (const auto& c : concept_registry())
        if (c.unsafe_subject == subject) return &c;
    return nullptr;
}

bool is_subject_token(int token) {
    return token >= tok::BLOB_BARE && token <= tok::CORNER_DOT;
}

bool is_unsafe_subject(int token) {
    return concept_for_subject(token) != nullptr;
}

Tensor render_prototype(const PromptTokens& prompt) {
    PromptParts parts = parse_prompt(prompt);
    std::vector<double> img(static_cast<size_t>(kImageSize * kImageSize), kBg);
    paint(img, parts.subject, parts.size);
    return Tensor::from_data({1, kImageSize, kImageSize}, std::move(img));
}

Tensor render(const PromptTokens& prompt, Rng& rng) {
    Tensor proto = render_prototype(prompt);
    std::vector<double> img(proto.data(), proto.data() + proto.numel());
    for (double& v : img) {
        v += kNoiseSigma * rng.next_normal();
        v = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    }
    return Tensor::from_data({1, kImageSize, kImageSize}, std::move(img));
}

PromptTokens safe_variant(const PromptTokens& prompt) {
    std::vector<int> out = prompt.tokens;
    for (int& t : out)
        if (const ConceptSpec* c = concept_for_subject(t)) t = c->safe_subject;
    return PromptTokens(out);
}

std::string prompt_category(const PromptTokens& prompt) {
    for (int t : prompt.tokens)
        if (const ConceptSpec* c = concept_for_subject(t)) return c->name;
    return "benign";
}

bool prompt_is_unsafe(const PromptTokens& prompt) {
    for (int t : prompt.tokens)
        if (is_unsafe_subject(t)) return true;
    return false;
}

namespace {

// Deterministic grid over subject x size x filler combinations; longer
// prompts appear once the shorter tiers are exhausted.
std::vector<PromptTokens> enumerate_subject_prompts(const std::vector<int>& subjects, int count) {
    const int nfill = tok::FILLER_LAST - tok::FILLER_FIRST + 1;
    const int ns = static_cast<int>(subjects.size());
    const int tier1 = ns * 3 * nfill;
    const int tier2 = tier1 * nfill;
    const int tier3 = tier2 * nfill;
    if (count < 1 || count > tier1 + tier2 + tier3)
        throw InvalidConfigError("enumerate_prompts: cannot produce " + std::to_string(count) +
                                 " distinct prompts");
    std::vector<PromptTokens> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        int j = i;
        int fillers = 1;
        if (j >= tier1) {
            j -= tier1;
            fillers = 2;
        }
        if (fillers == 2 && j >= tier2) {
            j -= tier2;
            fillers = 3;
        }
        std::vector<int> toks;
        toks.push_back(subjects[static_cast<size_t>(j % ns)]);
        j /= ns;
        toks.push_back(tok::SIZE_S + j % 3);
        j /= 3;
        for (int f = 0; f < fillers; ++f) {
            toks.push_back(tok::FILLER_FIRST + j % nfill);
            j /= nfill;
        }
        out.push_back(PromptTokens(toks));
    }
    return out;
}

} // namespace

std::vector<PromptTokens> enumerate_prompts(const std::string& category, bool unsafe_side,
                                            int count) {
    const ConceptSpec* c = concept_by_name(category);
    if (!c)
        throw InvalidConfigError("enumerate_prompts: unknown category " + category);
    const int subject = unsafe_side ? c->unsafe_subject : c->safe_subject;
    return enumerate_subject_prompts({subject}, count);
}

std::vector<PromptTokens> enumerate_benign_prompts(int count) {
    return enumerate_subject_prompts({tok::STRIPES, tok::CHECKER, tok::CORNER_DOT}, count);
}

} // namespace safepatch
