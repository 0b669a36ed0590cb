#include "safepatch/denoiser.hpp"

#include <cmath>
#include <sstream>

#include "safepatch/tape.hpp"

namespace safepatch {

namespace {

Tensor init_conv(int cout, int cin, int k, Rng& rng) {
    const double std = std::sqrt(2.0 / (cin * k * k));
    return ops::scale(Tensor::randn({cout, cin, k, k}, rng), std);
}

Tensor init_mat(int rows, int cols, Rng& rng) {
    const double std = std::sqrt(1.0 / rows);
    return ops::scale(Tensor::randn({rows, cols}, rng), std);
}

ConvBlock init_block(int cout, int cin, Rng& rng) {
    ConvBlock blk;
    blk.w = init_conv(cout, cin, 3, rng);
    blk.b = Tensor::zeros({cout});
    blk.tw = ops::scale(Tensor::randn({kTimeDim, cout}, rng), std::sqrt(1.0 / kTimeDim));
    return blk;
}

void visit_block(const std::string& prefix, ConvBlock& blk,
                 const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".w", blk.w);
    fn(prefix + ".b", blk.b);
    fn(prefix + ".tw", blk.tw);
}

void visit_attn(const std::string& prefix, CrossAttention& at,
                const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".wq", at.wq);
    fn(prefix + ".wk", at.wk);
    fn(prefix + ".wv", at.wv);
    fn(prefix + ".wo", at.wo);
}

} // namespace

Tensor block_forward(const ConvBlock& blk, const Tensor& x, const Tensor& temb, int stride) {
    Tensor h = ops::conv2d(x, blk.w, blk.b, stride, 1);
    Tensor tch = ops::reshape(ops::matmul(temb, blk.tw), {blk.w.dim(0)});
    return ops::silu(ops::add_channel_bias(h, tch));
}

void DenoiserParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("prompt_embed", prompt_embed);
    fn("time.w", time_w);
    fn("time.b", time_b);
    visit_block("enc1", enc1, fn);
    visit_block("enc2", enc2, fn);
    visit_block("mid", mid, fn);
    visit_attn("mid_attn", mid_attn, fn);
    visit_block("dec2", dec2, fn);
    visit_block("dec1", dec1, fn);
    fn("out.w", out_w);
    fn("out.b", out_b);
}

std::vector<Tensor*> DenoiserParams::tensors() {
    std::vector<Tensor*> out;
    visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

void DenoiserParams::set_trainable(bool on) {
    visit([&](const std::string&, Tensor& t) { t.set_trainable(on); });
}

DenoiserParams init_denoiser(Rng& rng) {
    DenoiserParams p;
    p.prompt_embed = ops::scale(Tensor::randn({kPromptVocab, kEmbedDim}, rng), 0.35);
    p.time_w = init_mat(kTimeDim, kTimeDim, rng);
    p.time_b = Tensor::zeros({1, kTimeDim});
    p.enc1 = init_block(16, 1, rng);
    p.enc2 = init_block(32, 16, rng);
    p.mid = init_block(32, 32, rng);
    p.mid_attn.wq = init_mat(kEmbedDim, kEmbedDim, rng);
    p.mid_attn.wk = init_mat(kEmbedDim, kEmbedDim, rng);
    p.mid_attn.wv = init_mat(kEmbedDim, kEmbedDim, rng);
    p.mid_attn.wo = ops::scale(init_mat(kEmbedDim, kEmbedDim, rng), 0.1);
    p.dec2 = init_block(16, 64, rng);
    p.dec1 = init_block(16, 32, rng);
    p.out_w = ops::scale(init_conv(1, 16, 3, rng), 0.2);
    p.out_b = Tensor::zeros({1});
    return p;
}

Tensor time_basis(int t) {
    std::vector<double> basis(kTimeDim);
    for (int i = 0; i < kTimeDim / 2; ++i) {
        const double freq = std::exp(-std::log(10000.0) * (2.0 * i / kTimeDim));
        basis[static_cast<size_t>(2 * i)] = std::sin(t * freq);
        basis[static_cast<size_t>(2 * i + 1)] = std::cos(t * freq);
    }
    return Tensor::from_data({1, kTimeDim}, std::move(basis));
}

Tensor encode_text(const DenoiserParams& params, const PromptTokens& prompt) {
    prompt.validate();
    return ops::gather_rows(params.prompt_embed, prompt.tokens);
}

Tensor encode_image(const Tensor& x) {
    if (x.shape() != Shape{1, kImageSize, kImageSize})
        throw InvalidImageError("encode_image: expected [1,16,16], got " + shape_str(x.shape()));
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double v = x.data()[i];
        if (!(v >= -1.0 && v <= 1.0))
            throw InvalidImageError("encode_image: value " + std::to_string(v) + " outside [-1,1]");
    }
    return x;
}

Tensor decode_image(const Tensor& z) {
    if (z.shape() != Shape{1, kImageSize, kImageSize})
        throw InvalidImageError("decode_image: expected [1,16,16], got " + shape_str(z.shape()));
    return z;
}

Tensor add_noise(const Tensor& z0, int t, const Tensor& epsilon, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps)
        throw InvalidStepError("add_noise: t=" + std::to_string(t) + " outside [1," +
                               std::to_string(schedule.steps) + "]");
    if (!z0.same_shape(epsilon))
        throw InvalidShapeError("add_noise: epsilon shape " + shape_str(epsilon.shape()) +
                                " does not match z0 " + shape_str(z0.shape()));
    const double abar = schedule.alpha_bar(t);
    return ops::add(ops::scale(z0, std::sqrt(abar)), ops::scale(epsilon, std::sqrt(1.0 - abar)));
}

// Cross-attention of spatial features [C,S,S] against token encodings [L,C].
Tensor cross_attend(const CrossAttention& at, const Tensor& feat, const Tensor& ctx) {
    const int64_t c = feat.dim(0);
    const int64_t positions = feat.dim(1) * feat.dim(2);
    Tensor q0 = ops::transpose(ops::reshape(feat, {c, positions}));  // [P,C]
    Tensor q = ops::matmul(q0, at.wq);
    Tensor k = ops::matmul(ctx, at.wk);
    Tensor v = ops::matmul(ctx, at.wv);
    Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(double(kEmbedDim)));
    Tensor attn = ops::softmax(scores);                               // [P,L]
    Tensor o = ops::matmul(ops::matmul(attn, v), at.wo);              // [P,C]
    Tensor o_spatial = ops::reshape(ops::transpose(o), feat.shape());
    return ops::add(feat, o_spatial);
}

EncoderTrace run_encoder(const DenoiserParams& base, const Tensor& x, int t, const Tensor& c_p) {
    EncoderTrace tr;
    Tensor basis = time_basis(t);
    tr.temb = ops::silu(ops::add(ops::matmul(basis, base.time_w), base.time_b));
    tr.h1 = block_forward(base.enc1, x, tr.temb, 2);       // [16,8,8]
    tr.h2 = block_forward(base.enc2, tr.h1, tr.temb, 2);   // [32,4,4]
    Tensor m = block_forward(base.mid, tr.h2, tr.temb, 1); // [32,4,4]
    tr.mid = cross_attend(base.mid_attn, m, c_p);
    return tr;
}

Tensor run_decoder(const DenoiserParams& base, const EncoderTrace& enc, const Injections* inj) {
    Tensor mid_in = enc.mid;
    Tensor skip2 = enc.h2;
    Tensor skip1 = enc.h1;
    if (inj) {
        if (!inj->mid.defined() || !inj->skip_e2.defined() || !inj->skip_e1.defined())
            throw InvalidInjectionError("run_decoder: missing injection tensor");
        if (!inj->mid.same_shape(mid_in))
            throw InvalidInjectionError("run_decoder: mid injection shape " +
                                        shape_str(inj->mid.shape()));
        if (!inj->skip_e2.same_shape(skip2))
            throw InvalidInjectionError("run_decoder: enc2 skip injection shape " +
                                        shape_str(inj->skip_e2.shape()));
        if (!inj->skip_e1.same_shape(skip1))
            throw InvalidInjectionError("run_decoder: enc1 skip injection shape " +
                                        shape_str(inj->skip_e1.shape()));
        mid_in = ops::add(mid_in, inj->mid);
        skip2 = ops::add(skip2, inj->skip_e2);
        skip1 = ops::add(skip1, inj->skip_e1);
    }
    Tensor d2in = ops::upsample_nearest2(ops::concat_channels(mid_in, skip2));  // [64,8,8]
    Tensor d2 = block_forward(base.dec2, d2in, enc.temb, 1);                    // [16,8,8]
    Tensor d1in = ops::upsample_nearest2(ops::concat_channels(d2, skip1));      // [32,16,16]
    Tensor d1 = block_forward(base.dec1, d1in, enc.temb, 1);                    // [16,16,16]
    return ops::conv2d(d1, base.out_w, base.out_b, 1, 1);                       // [1,16,16]
}

Tensor predict_noise(const DenoiserParams& base, const Tensor& z_t, int t, const Tensor& c_p,
                     const Injections* injections) {
    if (z_t.shape() != Shape{1, kImageSize, kImageSize})
        throw InvalidShapeError("predict_noise: z_t must be [1,16,16], got " + shape_str(z_t.shape()));
    EncoderTrace enc = run_encoder(base, z_t, t, c_p);
    return run_decoder(base, enc, injections);
}

Tensor clamp_image(const Tensor& x) {
    std::vector<double> out(x.data(), x.data() + x.numel());
    for (double& v : out) v = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    return Tensor::from_data(x.shape(), std::move(out));
}

TrainLog train_base(DenoiserParams& base, std::span<const DatasetPair> corpus,
                    const NoiseSchedule& schedule, const TrainBaseConfig& config, Rng& rng) {
    if (corpus.empty())
        throw InvalidConfigError("train_base: corpus is empty");
    if (config.max_steps < 1 || config.batch_size < 1)
        throw InvalidConfigError("train_base: bad step/batch config");

    base.set_trainable(true);
    std::vector<Tensor*> params = base.tensors();
    AdamState opt = AdamState::init(params);

    // Fixed held-out batch with frozen (t, eps) draws for a comparable loss.
    Rng held_rng = rng.fork(0xE7A1);
    const size_t held_n = std::min<size_t>(corpus.size(), 16);
    std::vector<size_t> held_idx(held_n);
    std::vector<int> held_t(held_n);
    std::vector<Tensor> held_eps(held_n);
    for (size_t i = 0; i < held_n; ++i) {
        held_idx[i] = i;
        held_t[i] = 1 + static_cast<int>(held_rng.next_below(static_cast<uint64_t>(schedule.steps)));
        held_eps[i] = Tensor::randn({1, kImageSize, kImageSize}, held_rng);
    }
    auto heldout_loss = [&]() {
        double acc = 0.0;
        for (size_t i = 0; i < held_n; ++i) {
            const DatasetPair& rec = corpus[held_idx[i]];
            Tensor z0 = encode_image(rec.image);
            Tensor zt = add_noise(z0, held_t[i], held_eps[i], schedule);
            Tensor cp = encode_text(base, rec.prompt);
            Tensor eps_hat = predict_noise(base, zt, held_t[i], cp);
            acc += ops::mse(held_eps[i], eps_hat).item();
        }
        return acc / static_cast<double>(held_n);
    };

    TrainLog log;
    log.first_heldout = heldout_loss();
    Rng step_rng = rng.fork(0x7247);
    for (int64_t step = 0; step < config.max_steps; ++step) {
        Tape tape;
        Tensor loss;
        for (int bi = 0; bi < config.batch_size; ++bi) {
            const DatasetPair& rec = corpus[step_rng.next_below(corpus.size())];
            const int t = 1 + static_cast<int>(step_rng.next_below(static_cast<uint64_t>(schedule.steps)));
            Tensor eps = Tensor::randn({1, kImageSize, kImageSize}, step_rng);
            Tensor z0 = encode_image(rec.image);
            Tensor zt = add_noise(z0, t, eps, schedule);
            Tensor cp = encode_text(base, rec.prompt);
            Tensor eps_hat = predict_noise(base, zt, t, cp);
            Tensor l = ops::mse(eps, eps_hat);
            loss = bi == 0 ? l : ops::add(loss, l);
        }
        loss = ops::scale(loss, 1.0 / config.batch_size);
        const double loss_val = loss.item();
        tape.backward(loss, params);
        adam_step(params, opt, config.adam);

        MetricPoint pt;
        pt.step = step;
        pt.loss = loss_val;
        if (config.eval_every > 0 && (step % config.eval_every == 0 || step + 1 == config.max_steps)) {
            pt.eval = heldout_loss();
            pt.has_eval = true;
        }
        log.points.push_back(pt);
    }
    log.last_heldout = heldout_loss();
    base.set_trainable(false);
    return log;
}

} // namespace safepatch
