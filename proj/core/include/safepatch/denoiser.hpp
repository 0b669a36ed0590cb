#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "safepatch/dataset.hpp"
#include "safepatch/ops.hpp"
#include "safepatch/optim.hpp"
#include "safepatch/schedule.hpp"
#include "safepatch/tokens.hpp"

namespace safepatch {

// Conv layer with a learned projection of the shared time embedding onto its
// output channels.
struct ConvBlock {
    Tensor w;   // [Cout,Cin,3,3]
    Tensor b;   // [Cout]
    Tensor tw;  // [kTimeDim,Cout]
};

struct CrossAttention {
    Tensor wq, wk, wv, wo;  // all [kEmbedDim,kEmbedDim]
};

// The locked text-to-image model. Downsampling path 16 -> 8 -> 4, one
// cross-attention over prompt tokens at the bottleneck, skip connections
// into both decoder stages.
struct DenoiserParams {
    Tensor prompt_embed;     // [kPromptVocab,kEmbedDim]
    Tensor time_w;           // [kTimeDim,kTimeDim]
    Tensor time_b;           // [1,kTimeDim]
    ConvBlock enc1;          // 1 -> 16, stride 2
    ConvBlock enc2;          // 16 -> 32, stride 2
    ConvBlock mid;           // 32 -> 32
    CrossAttention mid_attn;
    ConvBlock dec2;          // 64 -> 16 after upsample to 8x8
    ConvBlock dec1;          // 32 -> 16 after upsample to 16x16
    Tensor out_w;            // [1,16,3,3]
    Tensor out_b;            // [1]

    // Fixed enumeration order; names are the checkpoint tensor names.
    void visit(const std::function<void(const std::string&, Tensor&)>& fn);
    std::vector<Tensor*> tensors();
    void set_trainable(bool on);
};

DenoiserParams init_denoiser(Rng& rng);

// Sinusoidal time basis, shape [1,kTimeDim].
Tensor time_basis(int t);

// Residual cross-attention of spatial features [C,S,S] over token encodings
// [L,C]; queries come from the flattened spatial positions.
Tensor cross_attend(const CrossAttention& at, const Tensor& feat, const Tensor& ctx);

// conv + time-channel bias + silu; shared by the locked model and the
// trainable copy.
Tensor block_forward(const ConvBlock& blk, const Tensor& x, const Tensor& temb, int stride);

// c_p: one embedding row per prompt token.
Tensor encode_text(const DenoiserParams& params, const PromptTokens& prompt);

// Identity image encoder kept as a seam; validates shape and range.
Tensor encode_image(const Tensor& x);
Tensor decode_image(const Tensor& z);

// Forward noising: z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
Tensor add_noise(const Tensor& z0, int t, const Tensor& epsilon, const NoiseSchedule& schedule);

// Signals added to the decoder-side activations, one per injection site.
struct Injections {
    Tensor mid;      // [32,4,4]
    Tensor skip_e2;  // [32,4,4]
    Tensor skip_e1;  // [16,8,8]
};

Tensor predict_noise(const DenoiserParams& base, const Tensor& z_t, int t, const Tensor& c_p,
                     const Injections* injections = nullptr);

// Activations the patch consumes; exposed so the trainable copy can run the
// same stem computation.
struct EncoderTrace {
    Tensor temb;  // [1,kTimeDim]
    Tensor h1;    // [16,8,8]
    Tensor h2;    // [32,4,4]
    Tensor mid;   // [32,4,4] (after attention)
};

EncoderTrace run_encoder(const DenoiserParams& base, const Tensor& x, int t, const Tensor& c_p);
Tensor run_decoder(const DenoiserParams& base, const EncoderTrace& enc, const Injections* injections);

struct TrainBaseConfig {
    int64_t max_steps = 4000;
    int batch_size = 8;
    AdamConfig adam;
    int64_t eval_every = 200;
    uint64_t seed = 0;
};

struct MetricPoint {
    int64_t step = 0;
    double loss = 0.0;
    double eval = 0.0;   // held-out loss or panel metric, depending on loop
    bool has_eval = false;
};

struct TrainLog {
    std::vector<MetricPoint> points;
    double first_heldout = 0.0;
    double last_heldout = 0.0;
};

// Standard denoising training over (prompt, image) pairs. Marks the model
// trainable for the duration and locks it again before returning.
TrainLog train_base(DenoiserParams& base, std::span<const DatasetPair> corpus,
                    const NoiseSchedule& schedule, const TrainBaseConfig& config, Rng& rng);

Tensor clamp_image(const Tensor& x);

} // namespace safepatch
