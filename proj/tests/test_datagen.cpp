#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "safepatch/datagen.hpp"
#include "safepatch/dataset_io.hpp"
#include "safepatch/evalmetrics.hpp"

using namespace safepatch;

TEST_SUITE_BEGIN("datagen");

TEST_CASE("render determinism and unknown patterns") {
    PromptTokens p({1, 9, 18});
    Rng a(5), b(5);
    Tensor ra = render(p, a);
    Tensor rb = render(p, b);
    CHECK(std::memcmp(ra.data(), rb.data(), 256 * sizeof(double)) == 0);

    Rng r(1);
    CHECK_THROWS_AS(render(PromptTokens({16, 17}), r), InvalidPromptError);  // fillers only
}

TEST_CASE("renderer and classifier agree on every concept") {
    // 1000 renders per side per concept, >= 99% agreement required.
    for (const auto& c : concept_registry()) {
        Rng rng(100 + c.unsafe_subject);
        int unsafe_hits = 0, safe_hits = 0;
        for (int i = 0; i < 1000; ++i) {
            const int size = tok::SIZE_S + i % 3;
            Tensor u = render(PromptTokens({c.unsafe_subject, size}), rng);
            Tensor s = render(PromptTokens({c.safe_subject, size}), rng);
            unsafe_hits += classify(u).unsafe_any ? 1 : 0;
            safe_hits += classify(s).unsafe_any ? 0 : 1;
        }
        CHECK(unsafe_hits >= 990);
        CHECK(safe_hits >= 990);
    }
}

TEST_CASE("rule rewriter substitutions") {
    RuleRewriter client;
    Rng rng(7);

    SUBCASE("unsafe prompt gets safe-subject candidates with style preserved") {
        PromptTokens p({1, 10, 19});
        auto cands = client.rewrite(p, 4, rng);
        REQUIRE(cands.size() == 4);
        for (const auto& c : cands) {
            CHECK(c.tokens[0] == tok::BLOB_COVERED);
            CHECK(c.tokens[1] == 10);  // size preserved
            CHECK_FALSE(prompt_is_unsafe(c));
        }
        CHECK(cands[0].tokens == std::vector<int>{2, 10, 19});  // rank 0 = direct substitution
    }

    SUBCASE("benign prompts pass through with NO_OP") {
        PromptTokens p({5, 8, 17});
        auto cands = client.rewrite(p, 3, rng);
        REQUIRE(cands.size() == 3);
        for (const auto& c : cands) CHECK(c == p);
        CHECK(client.condition(p).is_no_op());
    }

    SUBCASE("conditions map to the concept") {
        CHECK(client.condition(PromptTokens({1, 8})) == concept_by_name("blob")->condition);
        CHECK(client.condition(PromptTokens({3, 9, 20})) == concept_by_name("spikes")->condition);
    }

    SUBCASE("exact candidate count") {
        auto cands = client.rewrite(PromptTokens({3, 8, 16}), 3, rng);
        CHECK(cands.size() == 3);
    }
}

TEST_CASE("select_safe_image filtering and ranking") {
    Rng rng(9);
    PromptTokens safe_p({2, 9, 16});
    PromptTokens unsafe_p({1, 9, 16});
    Tensor safe_img = render(safe_p, rng);
    Tensor unsafe_img = render(unsafe_p, rng);

    SUBCASE("safe candidate wins over unsafe") {
        std::vector<ImageCandidate> cands{{unsafe_img, safe_p}, {safe_img, safe_p}};
        CHECK(select_safe_image(cands, 0.3) == 1);
    }

    SUBCASE("all unsafe is an error") {
        std::vector<ImageCandidate> cands{{unsafe_img, safe_p}, {unsafe_img, safe_p}};
        CHECK_THROWS_AS(select_safe_image(cands, 0.3), NoSafeCandidateError);
    }

    SUBCASE("higher alignment wins among survivors") {
        Tensor noisy = safe_img.clone();
        Rng noise(11);
        for (int i = 0; i < 256; ++i)
            noisy.data()[i] =
                std::min(1.0, std::max(-1.0, noisy.data()[i] + 0.25 * noise.next_normal()));
        Tensor clean = render_prototype(safe_p);
        std::vector<ImageCandidate> cands{{noisy, safe_p}, {clean, safe_p}};
        CHECK(select_safe_image(cands, 0.3) == 1);
    }
}

TEST_CASE("pair dataset pipeline") {
    RuleRewriter client;
    Rng rng(13);
    auto prompts = enumerate_prompts("blob", true, 6);
    PairDataset ds = build_pair_dataset(prompts, client, renderer_backend(), 10, {}, rng);

    REQUIRE(ds.records.size() == 10);
    for (const auto& rec : ds.records) {
        CHECK(rec.condition == concept_by_name("blob")->condition);
        CHECK_FALSE(rec.is_benign);
        CHECK_FALSE(classify(rec.image).unsafe_any);  // soundness at the standard threshold
        CHECK(prompt_is_unsafe(rec.prompt));
    }
    CHECK(ds.manifest.lines.size() >= 10);

    SUBCASE("deterministic under the same seed") {
        Rng rng2(13);
        PairDataset ds2 = build_pair_dataset(prompts, client, renderer_backend(), 10, {}, rng2);
        for (size_t i = 0; i < 10; ++i)
            CHECK(std::memcmp(ds.records[i].image.data(), ds2.records[i].image.data(),
                              256 * sizeof(double)) == 0);
    }

    SUBCASE("empty prompt list rejected") {
        std::vector<PromptTokens> none;
        CHECK_THROWS_AS(build_pair_dataset(none, client, renderer_backend(), 3, {}, rng),
                        InvalidConfigError);
    }

    SUBCASE("benign prompts rejected") {
        std::vector<PromptTokens> bad{PromptTokens({5, 8})};
        CHECK_THROWS_AS(build_pair_dataset(bad, client, renderer_backend(), 3, {}, rng),
                        InvalidPromptError);
    }
}

TEST_CASE("benign dataset invariants") {
    Rng rng(17);
    auto ds = build_benign_dataset(enumerate_benign_prompts(9), 12, rng);
    REQUIRE(ds.size() == 12);
    for (const auto& rec : ds) {
        CHECK(rec.is_benign);
        CHECK(rec.condition.is_no_op());
        CHECK_FALSE(classify(rec.image).unsafe_any);
    }
    Rng rng2(17);
    auto ds2 = build_benign_dataset(enumerate_benign_prompts(9), 12, rng2);
    CHECK(std::memcmp(ds[3].image.data(), ds2[3].image.data(), 256 * sizeof(double)) == 0);
}

TEST_CASE("base corpus mixes concepts and benign records") {
    Rng rng(19);
    auto corpus = build_base_corpus(50, rng);
    REQUIRE(corpus.size() == 50);
    int blob = 0, spikes = 0, benign = 0;
    for (const auto& rec : corpus) {
        const std::string cat = prompt_category(rec.prompt);
        if (cat == "blob") ++blob;
        if (cat == "spikes") ++spikes;
        if (rec.is_benign) ++benign;
        CHECK(rec.is_benign == rec.condition.is_no_op());
    }
    CHECK(blob == 15);
    CHECK(spikes == 15);
    CHECK(benign == 20);
}

TEST_CASE("condition consistency holds for every emitted dataset") {
    RuleRewriter client;
    Rng rng(23);
    PairDataset pairs =
        build_pair_dataset(enumerate_prompts("spikes", true, 5), client, renderer_backend(), 8, {}, rng);
    auto benign = build_benign_dataset(enumerate_benign_prompts(5), 8, rng);
    auto corpus = build_base_corpus(30, rng);
    for (const auto& rec : pairs.records) CHECK(rec.is_benign == rec.condition.is_no_op());
    for (const auto& rec : benign) CHECK(rec.is_benign == rec.condition.is_no_op());
    for (const auto& rec : corpus) CHECK(rec.is_benign == rec.condition.is_no_op());
}

TEST_CASE("manifest balance warning fires on a skewed mix and stays quiet on a fair one") {
    RuleRewriter client;
    Rng rng(29);
    // all-blob requests starve the spikes category entirely
    PairDataset skewed = build_pair_dataset(enumerate_prompts("blob", true, 10), client,
                                            renderer_backend(), 10, {}, rng);
    REQUIRE_FALSE(skewed.manifest.warnings.empty());
    CHECK(skewed.manifest.str().find("warning=") != std::string::npos);

    std::vector<PromptTokens> fair = enumerate_prompts("blob", true, 5);
    for (auto& p : enumerate_prompts("spikes", true, 5)) fair.push_back(p);
    PairDataset balanced = build_pair_dataset(fair, client, renderer_backend(), 10, {}, rng);
    CHECK(balanced.manifest.warnings.empty());
}

TEST_CASE("dataset file round trip and format") {
    RuleRewriter client;
    Rng rng(31);
    PairDataset ds =
        build_pair_dataset(enumerate_prompts("blob", true, 4), client, renderer_backend(), 4, {}, rng);
    const std::string path = (std::filesystem::temp_directory_path() / "sp_dataset_test.txt").string();
    write_dataset(path, ds.records);
    auto back = read_dataset(path);
    REQUIRE(back.size() == ds.records.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].prompt == ds.records[i].prompt);
        CHECK(back[i].condition == ds.records[i].condition);
        CHECK(back[i].is_benign == ds.records[i].is_benign);
        // stored as float32: equal after one narrowing round trip
        for (int j = 0; j < 256; ++j)
            CHECK(back[i].image.data()[j] ==
                  static_cast<double>(static_cast<float>(ds.records[i].image.data()[j])));
    }

    SUBCASE("line format is pinned") {
        DatasetPair rec;
        rec.prompt = PromptTokens({1, 8});
        rec.condition = SafetyCondition({1, 2});
        rec.is_benign = false;
        std::vector<double> img(256, 0.0);
        img[0] = 1.0;
        rec.image = Tensor::from_data({1, 16, 16}, std::move(img));
        const std::string line = record_to_line(rec);
        CHECK(line.substr(0, 10) == "1 8|1 2|0|");
        CHECK(line.size() == 10 + 2048);
        CHECK(line.substr(10, 8) == "0000803f");  // 1.0f little-endian
        DatasetPair parsed = record_from_line(line);
        CHECK(parsed.image.data()[0] == 1.0);
        CHECK(parsed.image.data()[1] == 0.0);
    }

    SUBCASE("malformed lines are corrupt-file errors") {
        CHECK_THROWS_AS(record_from_line("1 8|1 2|0"), CorruptFileError);
        CHECK_THROWS_AS(record_from_line("1 8|1 2|0|abcd"), CorruptFileError);
        CHECK_THROWS_AS(record_from_line("1 8|1 2|2|" + std::string(2048, '0')), CorruptFileError);
    }
    std::filesystem::remove(path);
}

TEST_SUITE_END();
