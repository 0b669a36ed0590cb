#include <doctest.h>

#include <cmath>
#include <cstring>

#include "safepatch/grad_check.hpp"
#include "safepatch/sampler.hpp"
#include "safepatch/tape.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("patch");

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.numel() == b.numel() &&
           std::memcmp(a.data(), b.data(), static_cast<size_t>(a.numel()) * sizeof(double)) == 0;
}

DenoiserParams test_base(uint64_t seed = 21) {
    Rng rng(seed);
    return init_denoiser(rng);
}

// Nudges every zero layer off zero so gradient connectivity is visible.
void randomize_zero_layers(PatchParams& p, Rng& rng) {
    for (Tensor* t : {&p.zero_in.w, &p.zero_in.b, &p.zero_out_mid.w, &p.zero_out_mid.b,
                      &p.zero_out_e2.w, &p.zero_out_e2.b, &p.zero_out_e1.w, &p.zero_out_e1.b})
        for (int64_t i = 0; i < t->numel(); ++i) t->data()[i] = 0.05 * rng.next_normal();
}

} // namespace

TEST_CASE("init_patch clones the encoder and zeroes the connections") {
    DenoiserParams base = test_base();
    Rng rng(1);
    PatchParams p = init_patch(base, rng, "blob");

    CHECK(bitwise_equal(p.enc1.w, base.enc1.w));
    CHECK(bitwise_equal(p.enc2.w, base.enc2.w));
    CHECK(bitwise_equal(p.mid.w, base.mid.w));
    CHECK(bitwise_equal(p.mid_attn.wq, base.mid_attn.wq));
    CHECK_FALSE(p.enc1.w.same_storage(base.enc1.w));  // a copy, not a view

    for (const Tensor* t : {&p.zero_in.w, &p.zero_in.b, &p.zero_out_mid.w, &p.zero_out_mid.b,
                            &p.zero_out_e2.w, &p.zero_out_e2.b, &p.zero_out_e1.w, &p.zero_out_e1.b})
        for (int64_t i = 0; i < t->numel(); ++i) CHECK(t->data()[i] == 0.0);

    Rng rng2(1);
    PatchParams q = init_patch(base, rng2, "blob");
    CHECK(bitwise_equal(p.mapper.cond_embed, q.mapper.cond_embed));
    CHECK(bitwise_equal(p.mapper.attn.wq, q.mapper.attn.wq));
    CHECK(p.meta.category == "blob");
}

TEST_CASE("fresh patch injections are exactly zero") {
    DenoiserParams base = test_base();
    Rng rng(2);
    PatchParams p = init_patch(base, rng);
    Tensor zt = Tensor::randn({1, 16, 16}, rng);
    Tensor cp = encode_text(base, PromptTokens({1, 8, 22}));
    Injections inj = patch_forward(p, base, zt, 3, cp, concept_by_name("blob")->condition);
    for (const Tensor* t : {&inj.mid, &inj.skip_e2, &inj.skip_e1})
        for (int64_t i = 0; i < t->numel(); ++i) CHECK(t->data()[i] == 0.0);

    Injections again = patch_forward(p, base, zt, 3, cp, concept_by_name("blob")->condition);
    CHECK(bitwise_equal(inj.mid, again.mid));
    CHECK(bitwise_equal(inj.skip_e1, again.skip_e1));
}

TEST_CASE("zero-init equivalence across predict_noise and sampling") {
    DenoiserParams base = test_base();
    NoiseSchedule sched = make_schedule(6, 1e-3, 0.05);
    Rng rng(3);
    PatchParams p = init_patch(base, rng);

    // 100 random inputs through predict_noise
    for (int trial = 0; trial < 100; ++trial) {
        Tensor zt = Tensor::randn({1, 16, 16}, rng);
        const int t = 1 + static_cast<int>(rng.next_below(6));
        PromptTokens prompt({static_cast<int>(1 + rng.next_below(7)), 9, 17});
        Tensor cp = encode_text(base, prompt);
        Tensor plain = predict_noise(base, zt, t, cp);
        Tensor patched = predict_noise_patched(base, p, zt, t, cp, resolve_condition(prompt));
        REQUIRE(bitwise_equal(plain, patched));
    }

    // sampling runs
    Sampler sampler(base, sched);
    Sampler with_patch = sampler.attach(p);
    for (int i = 0; i < 5; ++i) {
        PromptTokens prompt({1, 8, static_cast<int>(16 + i)});
        Tensor a = sampler.sample_seeded(prompt, 1000 + i);
        Tensor b = with_patch.sample_seeded(prompt, 1000 + i);
        REQUIRE(bitwise_equal(a, b));
    }
}

TEST_CASE("map_condition shape and gradients") {
    DenoiserParams base = test_base();
    Rng rng(4);
    PatchParams p = init_patch(base, rng);
    Tensor zt = Tensor::randn({1, 16, 16}, rng);
    Tensor cs = encode_condition(p.mapper, concept_by_name("spikes")->condition);
    Tensor cond = map_condition(p.mapper, zt, cs);
    CHECK(cond.shape() == Shape{kMapperChannels, 16, 16});

    // differentiable w.r.t. mapper parameters through a scalar head
    p.mapper.cond_embed.set_trainable(true);
    p.mapper.lift_w.set_trainable(true);
    p.mapper.attn.wq.set_trainable(true);
    p.mapper.proj_w.set_trainable(true);
    std::vector<Tensor*> params{&p.mapper.cond_embed, &p.mapper.lift_w, &p.mapper.attn.wq,
                                &p.mapper.proj_w};
    auto f = [&]() {
        Tensor cs2 = encode_condition(p.mapper, concept_by_name("spikes")->condition);
        return ops::sum(ops::silu(map_condition(p.mapper, zt, cs2)));
    };
    Rng check_rng(5);
    CHECK(grad_check(f, params, 1e-5, 6, check_rng) < 1e-4);

    CHECK_THROWS_AS(map_condition(p.mapper, Tensor::zeros({1, 8, 8}), cs), InvalidShapeError);
}

TEST_CASE("gradients reach every patch tensor and no base tensor") {
    DenoiserParams base = test_base();
    Rng rng(6);
    PatchParams p = init_patch(base, rng);
    randomize_zero_layers(p, rng);

    Tensor zt = Tensor::randn({1, 16, 16}, rng);
    Tensor eps = Tensor::randn({1, 16, 16}, rng);
    PromptTokens prompt({1, 10, 25});

    p.set_trainable(true);
    std::vector<Tensor*> params = p.tensors();
    Tape tape;
    Tensor cp = encode_text(base, prompt);
    Tensor out = predict_noise_patched(base, p, zt, 4, cp, resolve_condition(prompt));
    Tensor loss = ops::mse(eps, out);
    tape.backward(loss, params);
    p.set_trainable(false);

    for (Tensor* t : params) {
        REQUIRE(t->has_grad());
        double norm = 0.0;
        for (double g : t->grad()) norm += g * g;
        CHECK(norm > 0.0);  // every patch tensor participates
    }
    for (Tensor* t : base.tensors()) CHECK_FALSE(t->has_grad());
}

TEST_CASE("merge algebra") {
    DenoiserParams base = test_base();
    Rng rng(7);
    PatchParams p1 = init_patch(base, rng, "blob");
    PatchParams p2 = init_patch(base, rng, "spikes");
    randomize_zero_layers(p1, rng);
    randomize_zero_layers(p2, rng);
    for (Tensor* t : p2.tensors())
        for (int64_t i = 0; i < t->numel(); ++i) t->data()[i] += 0.01;

    SUBCASE("single entry is an identity") {
        PatchParams m = merge_patches({{&p1, 1.0}});
        auto a = m.tensors();
        auto b = p1.tensors();
        for (size_t i = 0; i < a.size(); ++i) REQUIRE(bitwise_equal(*a[i], *b[i]));
    }

    SUBCASE("merging a patch with itself is idempotent") {
        PatchParams m = merge_patches({{&p1, 1.0}, {&p1, 1.0}});
        auto a = m.tensors();
        auto b = p1.tensors();
        for (size_t i = 0; i < a.size(); ++i)
            for (int64_t j = 0; j < a[i]->numel(); ++j)
                CHECK(a[i]->data()[j] == doctest::Approx(b[i]->data()[j]).epsilon(1e-15));
    }

    SUBCASE("equal weights give the arithmetic mean") {
        PatchParams m = merge_patches({{&p1, 1.0}, {&p2, 1.0}});
        auto a = m.tensors();
        auto b1 = p1.tensors();
        auto b2 = p2.tensors();
        for (size_t i = 0; i < a.size(); ++i)
            for (int64_t j = 0; j < a[i]->numel(); ++j)
                CHECK(a[i]->data()[j] ==
                      doctest::Approx(0.5 * (b1[i]->data()[j] + b2[i]->data()[j])).epsilon(1e-12));
    }

    SUBCASE("order invariance within 1e-12") {
        PatchParams m1 = merge_patches({{&p1, 0.7}, {&p2, 0.3}});
        PatchParams m2 = merge_patches({{&p2, 0.3}, {&p1, 0.7}});
        auto a = m1.tensors();
        auto b = m2.tensors();
        for (size_t i = 0; i < a.size(); ++i)
            for (int64_t j = 0; j < a[i]->numel(); ++j)
                CHECK(std::abs(a[i]->data()[j] - b[i]->data()[j]) <= 1e-12);
    }

    SUBCASE("weight scale invariance") {
        PatchParams m1 = merge_patches({{&p1, 1.0}, {&p2, 3.0}});
        PatchParams m2 = merge_patches({{&p1, 10.0}, {&p2, 30.0}});
        auto a = m1.tensors();
        auto b = m2.tensors();
        for (size_t i = 0; i < a.size(); ++i)
            for (int64_t j = 0; j < a[i]->numel(); ++j)
                CHECK(std::abs(a[i]->data()[j] - b[i]->data()[j]) <= 1e-12);
    }

    SUBCASE("meta records constituents") {
        PatchParams m = merge_patches({{&p1, 1.0}, {&p2, 2.0}});
        CHECK(m.meta.merged());
        CHECK(m.meta.merged_from == "blob:1.000000,spikes:2.000000");
        CHECK(m.meta.category == "multiple");
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(merge_patches({}), InvalidConfigError);
        CHECK_THROWS_AS(merge_patches({{&p1, 0.0}, {&p2, 0.0}}), InvalidConfigError);
        CHECK_THROWS_AS(merge_patches({{&p1, -1.0}, {&p2, 2.0}}), InvalidConfigError);
        PatchParams alien = p2.clone();
        alien.meta.arch = "other-arch";
        CHECK_THROWS_AS(merge_patches({{&p1, 1.0}, {&alien, 1.0}}), IncompatiblePatchError);
    }
}

TEST_CASE("attach and detach restore base behaviour bitwise") {
    DenoiserParams base = test_base();
    NoiseSchedule sched = make_schedule(5, 1e-3, 0.05);
    Rng rng(8);
    PatchParams p = init_patch(base, rng);
    randomize_zero_layers(p, rng);  // a patch that actually changes outputs

    PromptTokens prompt({1, 9, 23});
    Sampler plain(base, sched);
    Tensor never = plain.sample_seeded(prompt, 99);

    Sampler attached = plain.attach(p);
    Tensor with_patch = attached.sample_seeded(prompt, 99);
    CHECK_FALSE(bitwise_equal(never, with_patch));  // patch is live

    Sampler detached = attached.detach();
    Tensor restored = detached.sample_seeded(prompt, 99);
    CHECK(bitwise_equal(never, restored));
}

TEST_SUITE_END();
