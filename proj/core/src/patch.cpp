#include "safepatch/patch.hpp"

#include <cmath>
#include <cstring>

namespace safepatch {

namespace {

void visit_zero(const std::string& prefix, ZeroConv& z,
                const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".w", z.w);
    fn(prefix + ".b", z.b);
}

ZeroConv make_zero(int cout, int cin) {
    return {Tensor::zeros({cout, cin, 1, 1}), Tensor::zeros({cout})};
}

Tensor copy_of(const Tensor& t) {
    return t.clone();
}

} // namespace

void PatchParams::visit(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("copy.enc1.w", enc1.w);
    fn("copy.enc1.b", enc1.b);
    fn("copy.enc1.tw", enc1.tw);
    fn("copy.enc2.w", enc2.w);
    fn("copy.enc2.b", enc2.b);
    fn("copy.enc2.tw", enc2.tw);
    fn("copy.mid.w", mid.w);
    fn("copy.mid.b", mid.b);
    fn("copy.mid.tw", mid.tw);
    fn("copy.mid_attn.wq", mid_attn.wq);
    fn("copy.mid_attn.wk", mid_attn.wk);
    fn("copy.mid_attn.wv", mid_attn.wv);
    fn("copy.mid_attn.wo", mid_attn.wo);
    visit_zero("zero_in", zero_in, fn);
    visit_zero("zero_out_mid", zero_out_mid, fn);
    visit_zero("zero_out_e2", zero_out_e2, fn);
    visit_zero("zero_out_e1", zero_out_e1, fn);
    fn("mapper.cond_embed", mapper.cond_embed);
    fn("mapper.lift.w", mapper.lift_w);
    fn("mapper.lift.b", mapper.lift_b);
    fn("mapper.attn.wq", mapper.attn.wq);
    fn("mapper.attn.wk", mapper.attn.wk);
    fn("mapper.attn.wv", mapper.attn.wv);
    fn("mapper.attn.wo", mapper.attn.wo);
    fn("mapper.proj.w", mapper.proj_w);
    fn("mapper.proj.b", mapper.proj_b);
}

std::vector<Tensor*> PatchParams::tensors() {
    std::vector<Tensor*> out;
    visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

void PatchParams::set_trainable(bool on) {
    visit([&](const std::string&, Tensor& t) { t.set_trainable(on); });
}

PatchParams PatchParams::clone() const {
    PatchParams out = *this;
    out.visit([](const std::string&, Tensor& t) { t = t.clone(); });
    return out;
}

PatchParams init_patch(const DenoiserParams& base, Rng& rng, const std::string& category) {
    PatchParams p;
    p.enc1 = {copy_of(base.enc1.w), copy_of(base.enc1.b), copy_of(base.enc1.tw)};
    p.enc2 = {copy_of(base.enc2.w), copy_of(base.enc2.b), copy_of(base.enc2.tw)};
    p.mid = {copy_of(base.mid.w), copy_of(base.mid.b), copy_of(base.mid.tw)};
    p.mid_attn = {copy_of(base.mid_attn.wq), copy_of(base.mid_attn.wk),
                  copy_of(base.mid_attn.wv), copy_of(base.mid_attn.wo)};
    p.zero_in = make_zero(1, kMapperChannels);
    p.zero_out_mid = make_zero(32, 32);
    p.zero_out_e2 = make_zero(32, 32);
    p.zero_out_e1 = make_zero(16, 16);

    p.mapper.cond_embed = ops::scale(Tensor::randn({kCondVocab, kEmbedDim}, rng), 0.35);
    p.mapper.lift_w = ops::scale(Tensor::randn({kEmbedDim, 1, 1, 1}, rng), 0.5);
    p.mapper.lift_b = Tensor::zeros({kEmbedDim});
    const double s = std::sqrt(1.0 / kEmbedDim);
    p.mapper.attn.wq = ops::scale(Tensor::randn({kEmbedDim, kEmbedDim}, rng), s);
    p.mapper.attn.wk = ops::scale(Tensor::randn({kEmbedDim, kEmbedDim}, rng), s);
    p.mapper.attn.wv = ops::scale(Tensor::randn({kEmbedDim, kEmbedDim}, rng), s);
    p.mapper.attn.wo = ops::scale(Tensor::randn({kEmbedDim, kEmbedDim}, rng), 0.1 * s);
    p.mapper.proj_w = ops::scale(Tensor::randn({kMapperChannels, kEmbedDim, 1, 1}, rng),
                                 std::sqrt(2.0 / kEmbedDim));
    p.mapper.proj_b = Tensor::zeros({kMapperChannels});

    p.meta.category = category;
    return p;
}

Tensor encode_condition(const MapperParams& mapper, const SafetyCondition& s) {
    s.validate();
    return ops::gather_rows(mapper.cond_embed, s.tokens);
}

Tensor map_condition(const MapperParams& mapper, const Tensor& z_t, const Tensor& c_s) {
    if (z_t.shape() != Shape{1, kImageSize, kImageSize})
        throw InvalidShapeError("map_condition: z_t must be [1,16,16], got " + shape_str(z_t.shape()));
    if (c_s.rank() != 2 || c_s.dim(1) != kEmbedDim)
        throw InvalidShapeError("map_condition: c_s must be [L," + std::to_string(kEmbedDim) + "]");
    Tensor lifted = ops::conv2d(z_t, mapper.lift_w, mapper.lift_b, 1, 0);  // [32,16,16]
    Tensor attended = cross_attend(mapper.attn, lifted, c_s);
    return ops::silu(ops::conv2d(attended, mapper.proj_w, mapper.proj_b, 1, 0));
}

Injections patch_forward(const PatchParams& patch, const DenoiserParams& base, const Tensor& z_t,
                         int t, const Tensor& c_p, const SafetyCondition& s) {
    Tensor c_s = encode_condition(patch.mapper, s);
    Tensor cond = map_condition(patch.mapper, z_t, c_s);
    Tensor cond_in = ops::conv2d(cond, patch.zero_in.w, patch.zero_in.b, 1, 0);  // [1,16,16]
    Tensor x = ops::add(z_t, cond_in);

    // Same time and prompt conditioning as the locked encoder.
    Tensor basis = time_basis(t);
    Tensor temb = ops::silu(ops::add(ops::matmul(basis, base.time_w), base.time_b));
    Tensor h1 = block_forward(patch.enc1, x, temb, 2);
    Tensor h2 = block_forward(patch.enc2, h1, temb, 2);
    Tensor m = block_forward(patch.mid, h2, temb, 1);
    m = cross_attend(patch.mid_attn, m, c_p);

    Injections inj;
    inj.mid = ops::conv2d(m, patch.zero_out_mid.w, patch.zero_out_mid.b, 1, 0);
    inj.skip_e2 = ops::conv2d(h2, patch.zero_out_e2.w, patch.zero_out_e2.b, 1, 0);
    inj.skip_e1 = ops::conv2d(h1, patch.zero_out_e1.w, patch.zero_out_e1.b, 1, 0);
    return inj;
}

Tensor predict_noise_patched(const DenoiserParams& base, const PatchParams& patch,
                             const Tensor& z_t, int t, const Tensor& c_p,
                             const SafetyCondition& s) {
    Injections inj = patch_forward(patch, base, z_t, t, c_p, s);
    return predict_noise(base, z_t, t, c_p, &inj);
}

PatchParams merge_patches(const std::vector<MergeEntry>& entries) {
    if (entries.empty())
        throw InvalidConfigError("merge_patches: no entries");
    double wsum = 0.0;
    for (const auto& e : entries) {
        if (!e.patch)
            throw InvalidConfigError("merge_patches: null patch");
        if (e.weight < 0.0)
            throw InvalidConfigError("merge_patches: negative weight");
        wsum += e.weight;
    }
    if (!(wsum > 0.0))
        throw InvalidConfigError("merge_patches: weights sum to zero");
    for (const auto& e : entries)
        if (e.patch->meta.arch != entries[0].patch->meta.arch)
            throw IncompatiblePatchError("merge_patches: architecture tag mismatch: " +
                                         e.patch->meta.arch + " vs " + entries[0].patch->meta.arch);

    PatchParams out = entries[0].patch->clone();
    std::vector<Tensor*> acc = out.tensors();
    std::vector<std::vector<Tensor*>> parts;
    parts.reserve(entries.size());
    for (const auto& e : entries)
        parts.push_back(const_cast<PatchParams*>(e.patch)->tensors());

    for (size_t ti = 0; ti < acc.size(); ++ti) {
        Tensor& dst = *acc[ti];
        for (size_t ei = 1; ei < entries.size(); ++ei) {
            if (!parts[ei][ti]->same_shape(dst))
                throw IncompatiblePatchError("merge_patches: tensor shape mismatch between patches");
        }
        const int64_t n = dst.numel();
        for (int64_t i = 0; i < n; ++i) {
            double v = 0.0;
            for (size_t ei = 0; ei < entries.size(); ++ei)
                v += entries[ei].weight * parts[ei][ti]->data()[i];
            dst.data()[i] = v / wsum;
        }
    }

    std::string merged;
    for (size_t ei = 0; ei < entries.size(); ++ei) {
        if (ei) merged += ",";
        const std::string& cat = entries[ei].patch->meta.category;
        merged += (cat.empty() ? "patch" : cat) + ":" + std::to_string(entries[ei].weight);
    }
    out.meta.merged_from = merged;
    out.meta.category = entries.size() == 1 ? entries[0].patch->meta.category : "multiple";
    return out;
}

uint64_t hash_tensors(const std::vector<Tensor*>& tensors) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (const Tensor* t : tensors) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(t->data());
        const size_t n = static_cast<size_t>(t->numel()) * sizeof(double);
        for (size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

} // namespace safepatch
