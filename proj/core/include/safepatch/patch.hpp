#pragma once

#include <functional>
#include <string>
#include <vector>

#include "safepatch/denoiser.hpp"

namespace safepatch {

inline constexpr int kMapperChannels = 8;
inline constexpr const char* kArchTag = "unet16-v1";

// Safety-condition mapping network: embeds the condition tokens, attends the
// lifted noisy-image features over them, and projects to a condition feature
// map the zero-in layer consumes.
struct MapperParams {
    Tensor cond_embed;  // [kCondVocab,kEmbedDim]
    Tensor lift_w;      // [kEmbedDim,1,1,1]
    Tensor lift_b;      // [kEmbedDim]
    CrossAttention attn;
    Tensor proj_w;      // [kMapperChannels,kEmbedDim,1,1]
    Tensor proj_b;      // [kMapperChannels]
};

// 1x1 zero-initialised connection layer.
struct ZeroConv {
    Tensor w;
    Tensor b;
};

struct PatchMeta {
    std::string category;      // e.g. "blob"
    std::string arch = kArchTag;
    int version = 1;
    std::string merged_from;   // "blob:1,spikes:1" for merged patches
    bool merged() const { return !merged_from.empty(); }
};

// The trainable patch: a copy of the locked model's encoding blocks, the
// condition mapper, and the zero connections that splice it in.
struct PatchParams {
    ConvBlock enc1, enc2, mid;     // copies of the base blocks
    CrossAttention mid_attn;
    ZeroConv zero_in;              // [1,kMapperChannels,1,1]
    ZeroConv zero_out_mid;         // [32,32,1,1]
    ZeroConv zero_out_e2;          // [32,32,1,1]
    ZeroConv zero_out_e1;          // [16,16,1,1]
    MapperParams mapper;
    PatchMeta meta;

    void visit(const std::function<void(const std::string&, Tensor&)>& fn);
    std::vector<Tensor*> tensors();
    void set_trainable(bool on);
    PatchParams clone() const;
};

// Copy the base encoder blocks bitwise, zero every connection layer, and
// randomly initialise the mapper.
PatchParams init_patch(const DenoiserParams& base, Rng& rng, const std::string& category = "");

// c_s: one mapper-embedding row per condition token.
Tensor encode_condition(const MapperParams& mapper, const SafetyCondition& s);

// Condition feature map [kMapperChannels,16,16] from (z_t, c_s).
Tensor map_condition(const MapperParams& mapper, const Tensor& z_t, const Tensor& c_s);

// Full patch computation: the three injection tensors for the decoder.
Injections patch_forward(const PatchParams& patch, const DenoiserParams& base, const Tensor& z_t,
                         int t, const Tensor& c_p, const SafetyCondition& s);

Tensor predict_noise_patched(const DenoiserParams& base, const PatchParams& patch,
                             const Tensor& z_t, int t, const Tensor& c_p,
                             const SafetyCondition& s);

// Normalised weighted average of every tensor across the entries.
struct MergeEntry {
    const PatchParams* patch;
    double weight;
};
PatchParams merge_patches(const std::vector<MergeEntry>& entries);

// FNV-1a over the raw bytes of every tensor, in visit order.
uint64_t hash_tensors(const std::vector<Tensor*>& tensors);

} // namespace safepatch
