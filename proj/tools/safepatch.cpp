// Command-line front end: the full train / build-data / train-patch / merge /
// sample / eval / sweep workflow over the toy diffusion model.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "safepatch/checkpoint.hpp"
#include "safepatch/config.hpp"
#include "safepatch/datagen.hpp"
#include "safepatch/dataset_io.hpp"
#include "safepatch/parallel.hpp"
#include "safepatch/pgm.hpp"
#include "safepatch/sampler.hpp"
#include "safepatch/train.hpp"

namespace fs = std::filesystem;
using namespace safepatch;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string seed;
    std::string out;
    std::string base;
    std::string patch;
    std::string weights;
    std::string prompts;
    std::string panel;
    std::string steps;
    std::string size;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "key=value config file");
    cmd->add_option("--seed", f.seed, "root seed override");
    cmd->add_option("--out", f.out, "output path override");
    cmd->add_option("--base", f.base, "base model checkpoint");
    cmd->add_option("--patch", f.patch, "patch checkpoint");
    cmd->add_option("--weights", f.weights, "merge weights, space-separated");
    cmd->add_option("--prompts", f.prompts, "prompt tokens, space-separated ints");
    cmd->add_option("--panel", f.panel, "panel config file");
    cmd->add_option("--steps", f.steps, "step budget override");
    cmd->add_option("--size", f.size, "size/count override");
}

RunConfig load_config(const CommonFlags& f) {
    RunConfig cfg = f.config_path.empty() ? RunConfig() : RunConfig::from_file(f.config_path);
    if (!f.seed.empty()) cfg.set("seed", f.seed);
    if (!f.base.empty()) cfg.set("base.path", f.base);
    return cfg;
}

int thread_count(const RunConfig& cfg) {
    const int t = static_cast<int>(cfg.get_int("threads"));
    return t >= 1 ? t : default_thread_count();
}

void write_metrics_log(const std::string& path, const TrainLog& log) {
    std::ostringstream os;
    os.precision(8);
    os << "heldout.first=" << log.first_heldout << "\n";
    for (const auto& pt : log.points) {
        os << "step=" << pt.step << " loss=" << pt.loss;
        if (pt.has_eval) os << " eval=" << pt.eval;
        os << "\n";
    }
    os << "heldout.last=" << log.last_heldout << "\n";
    write_text_file(path, os.str());
}

struct Panel {
    std::vector<PanelPrompt> unsafe_prompts;
    std::vector<PanelPrompt> benign_prompts;
    std::vector<uint64_t> seeds;
};

Panel build_panel(const RunConfig& cfg) {
    Panel p;
    p.seeds = cfg.get_u64_list("panel.seeds");
    const std::string cat = cfg.get_str("panel.unsafe_category");
    if (cat != "none") {
        const int n = static_cast<int>(cfg.get_int("panel.unsafe_count"));
        for (auto& pr : enumerate_prompts(cat, true, n)) p.unsafe_prompts.push_back({pr, cat});
    }
    const int bn = static_cast<int>(cfg.get_int("panel.benign_count"));
    for (auto& pr : enumerate_benign_prompts(std::max(bn, 0) == 0 ? 1 : bn)) {
        if (bn <= 0) break;
        p.benign_prompts.push_back({pr, "benign"});
    }
    return p;
}

Panel load_panel(const RunConfig& cfg, const std::string& panel_path) {
    if (panel_path.empty()) return build_panel(cfg);
    return build_panel(RunConfig::from_file(panel_path));
}

std::unique_ptr<RewriterClient> make_client(const RunConfig& cfg) {
    const std::string cmd = cfg.get_str("data.rewriter_cmd");
    if (cmd.empty()) return std::make_unique<RuleRewriter>();
    return std::make_unique<ExternalRewriter>(cmd);
}

Precision precision_of(const RunConfig& cfg) {
    return cfg.get_str("precision") == "f32" ? Precision::f32 : Precision::f64;
}

// ---- subcommands ----------------------------------------------------------

int cmd_train_base(const CommonFlags& f) {
    RunConfig cfg = load_config(f);
    if (!f.steps.empty()) cfg.set("base.steps", f.steps);
    if (!f.size.empty()) cfg.set("base.corpus_size", f.size);
    const std::string out = f.out.empty() ? cfg.get_str("base.out") : f.out;

    Rng root(cfg.get_u64("seed"));
    NoiseSchedule sched = make_schedule(static_cast<int>(cfg.get_int("schedule.steps")),
                                        cfg.get_double("schedule.beta_start"),
                                        cfg.get_double("schedule.beta_end"));
    std::vector<DatasetPair> corpus;
    const std::string corpus_path = cfg.get_str("base.corpus");
    if (!corpus_path.empty()) {
        corpus = read_dataset(corpus_path);
    } else {
        Rng data_rng = root.fork(0xC0);
        corpus = build_base_corpus(static_cast<int>(cfg.get_int("base.corpus_size")), data_rng);
    }

    Rng init_rng = root.fork(0x1);
    DenoiserParams base = init_denoiser(init_rng);
    TrainBaseConfig tb;
    tb.max_steps = cfg.get_int("base.steps");
    tb.batch_size = static_cast<int>(cfg.get_int("base.batch"));
    tb.adam.lr = cfg.get_double("base.lr");
    tb.eval_every = cfg.get_int("base.eval_every");
    Rng train_rng = root.fork(0x2);
    TrainLog log = train_base(base, corpus, sched, tb, train_rng);

    save_base(out, base, sched, precision_of(cfg));
    write_metrics_log(out + ".log", log);
    std::cout << "trained base on " << corpus.size() << " records, heldout " << log.first_heldout
              << " -> " << log.last_heldout << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_build_data(const CommonFlags& f) {
    RunConfig cfg = load_config(f);
    if (!f.size.empty()) cfg.set("data.size", f.size);
    const std::string out = f.out.empty() ? cfg.get_str("data.out") : f.out;
    const std::string kind = cfg.get_str("data.kind");
    const int size = static_cast<int>(cfg.get_int("data.size"));
    Rng root(cfg.get_u64("seed"));
    Rng data_rng = root.fork(0xDA7A);

    if (kind == "base") {
        write_dataset(out, build_base_corpus(size, data_rng));
        std::cout << "wrote " << size << " base-corpus records to " << out << "\n";
        return 0;
    }
    if (kind == "benign") {
        const int pool = static_cast<int>(cfg.get_int("data.prompt_pool"));
        write_dataset(out, build_benign_dataset(enumerate_benign_prompts(pool), size, data_rng));
        std::cout << "wrote " << size << " benign records to " << out << "\n";
        return 0;
    }

    const std::string category = cfg.get_str("data.category");
    const int pool = static_cast<int>(cfg.get_int("data.prompt_pool"));
    DataGenConfig dg;
    dg.candidates_k = static_cast<int>(cfg.get_int("data.candidates"));
    dg.images_per_candidate = static_cast<int>(cfg.get_int("data.images_per_candidate"));
    dg.raised_threshold = cfg.get_double("data.raised_threshold");
    dg.max_retries = static_cast<int>(cfg.get_int("data.max_retries"));

    std::unique_ptr<RewriterClient> client = make_client(cfg);
    ImageBackend backend = renderer_backend();
    DenoiserParams base;     // kept alive for the model backend
    NoiseSchedule sched;
    if (cfg.get_str("data.source") == "model") {
        base = load_base(cfg.get_str("base.path"), &sched);
        Sampler sampler(base, sched);
        backend = [sampler](const PromptTokens& prompt, Rng& rng) {
            return sampler.sample(prompt, rng);
        };
    }

    PairDataset ds = build_pair_dataset(enumerate_prompts(category, true, pool), *client, backend,
                                        size, dg, data_rng);
    write_dataset(out, ds.records);
    write_text_file(cfg.get_str("data.manifest_out"), ds.manifest.str());
    for (const auto& w : ds.manifest.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << ds.records.size() << " pair records to " << out << "\n";
    return 0;
}

int cmd_train_patch(const CommonFlags& f) {
    RunConfig cfg = load_config(f);
    if (!f.steps.empty()) cfg.set("patch.steps", f.steps);
    const std::string category = cfg.get_str("patch.category");
    const std::string out = !f.out.empty()
                                ? f.out
                                : (cfg.is_set("patch.out") ? cfg.get_str("patch.out")
                                                           : "Safe-Control_" + category + ".spc");

    NoiseSchedule sched;
    DenoiserParams base = load_base(cfg.get_str("base.path"), &sched);
    std::vector<DatasetPair> dataset = read_dataset(cfg.get_str("patch.dataset"));
    const std::string benign_path = cfg.get_str("patch.benign_dataset");
    if (!benign_path.empty()) {
        std::vector<DatasetPair> benign = read_dataset(benign_path);
        dataset.insert(dataset.end(), benign.begin(), benign.end());
    }

    Rng root(cfg.get_u64("seed"));
    Rng init_rng = root.fork(0x3);
    PatchParams patch = init_patch(base, init_rng, category);

    TrainConfig tc;
    tc.max_steps = cfg.get_int("patch.steps");
    tc.batch_size = static_cast<int>(cfg.get_int("patch.batch"));
    tc.adam.lr = cfg.get_double("patch.lr");
    tc.benign_mix_ratio = cfg.get_double("patch.benign_mix");
    tc.seed = root.fork(0x4).seed;
    tc.eval_every = cfg.get_int("patch.eval_every");

    EvalHook hook = nullptr;
    Panel panel;
    if (tc.eval_every > 0) {
        panel = load_panel(cfg, f.panel);
        const int threads = thread_count(cfg);
        hook = [&base, &sched, &panel, threads](int64_t step, const PatchParams& snap) {
            Sampler s = Sampler(base, sched).attach(snap);
            const double rate =
                unsafe_probability(s.generator(), panel.unsafe_prompts, panel.seeds, {}, threads)
                    .overall;
            std::cout << "step " << step << " panel unsafe " << rate << "\n";
            return rate;
        };
    }

    TrainLog log = train_patch(base, patch, dataset, sched, tc, hook);
    save_patch(out, patch, precision_of(cfg));
    write_metrics_log(out + ".log", log);
    std::cout << "trained patch '" << category << "' on " << dataset.size() << " records, heldout "
              << log.first_heldout << " -> " << log.last_heldout << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_merge(const CommonFlags& f, const std::vector<std::string>& patch_paths) {
    RunConfig cfg = load_config(f);
    if (patch_paths.empty())
        throw InvalidConfigError("merge: no patch files given");
    std::vector<double> weights;
    if (!f.weights.empty()) {
        std::istringstream is(f.weights);
        double w;
        while (is >> w) weights.push_back(w);
        if (weights.size() != patch_paths.size())
            throw InvalidConfigError("merge: got " + std::to_string(weights.size()) +
                                     " weights for " + std::to_string(patch_paths.size()) +
                                     " patches");
    } else {
        weights.assign(patch_paths.size(), 1.0);
    }

    std::vector<PatchParams> loaded;
    loaded.reserve(patch_paths.size());
    for (const auto& p : patch_paths) loaded.push_back(load_patch(p));
    std::vector<MergeEntry> entries;
    for (size_t i = 0; i < loaded.size(); ++i) entries.push_back({&loaded[i], weights[i]});

    PatchParams merged = merge_patches(entries);
    const std::string out = f.out.empty() ? "Safe-Control_multiple.spc" : f.out;
    save_patch(out, merged, precision_of(cfg));
    std::cout << "merged " << patch_paths.size() << " patch(es) into " << out << " ["
              << merged.meta.merged_from << "]\n";
    return 0;
}

int cmd_sample(const CommonFlags& f, bool preview) {
    RunConfig cfg = load_config(f);
    if (!f.size.empty()) cfg.set("sample.count", f.size);
    if (!f.prompts.empty()) cfg.set("sample.prompt", f.prompts);
    const std::string prompt_text = cfg.get_str("sample.prompt");
    if (prompt_text.empty())
        throw InvalidConfigError("sample: no prompt given (--prompts)");
    PromptTokens prompt(parse_token_list(prompt_text));

    NoiseSchedule sched;
    DenoiserParams base = load_base(cfg.get_str("base.path"), &sched);
    PatchParams patch;
    Sampler sampler(base, sched);
    if (!f.patch.empty()) {
        patch = load_patch(f.patch);
        sampler = sampler.attach(patch);
    }

    const std::string out_dir = f.out.empty() ? "samples" : f.out;
    fs::create_directories(out_dir);
    const int count = static_cast<int>(cfg.get_int("sample.count"));
    const uint64_t seed = cfg.get_u64("seed");
    std::vector<Tensor> images;
    for (int i = 0; i < count; ++i) {
        const uint64_t s = rng_word(seed, static_cast<uint64_t>(i), 0x5A);
        Tensor img = sampler.sample_seeded(prompt, s);
        images.push_back(img);
        char name[32];
        std::snprintf(name, sizeof name, "sample_%03d.pgm", i);
        write_pgm((fs::path(out_dir) / name).string(), img);
        if (preview) std::cout << image_to_ascii(img) << "\n";
    }
    save_images((fs::path(out_dir) / "samples.spc").string(), images, precision_of(cfg));
    std::cout << "wrote " << count << " sample(s) to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& f) {
    RunConfig cfg = load_config(f);
    NoiseSchedule sched;
    DenoiserParams base = load_base(cfg.get_str("base.path"), &sched);
    PatchParams patch;
    const bool has_patch = !f.patch.empty();
    if (has_patch) patch = load_patch(f.patch);

    Panel panel = load_panel(cfg, f.panel.empty() ? cfg.get_str("eval.panel") : f.panel);
    const int threads = thread_count(cfg);
    ClassifierThresholds thr{cfg.get_double("eval.threshold_center"),
                             cfg.get_double("eval.threshold_correl")};

    Sampler base_sampler(base, sched);
    Sampler patched_sampler = has_patch ? base_sampler.attach(patch) : base_sampler;

    EvalReport report;
    report.seeds = panel.seeds;
    report.has_patch = has_patch;
    if (!panel.unsafe_prompts.empty()) {
        report.base_rates =
            unsafe_probability(base_sampler.generator(), panel.unsafe_prompts, panel.seeds, thr, threads);
        if (has_patch) {
            report.patched_rates = unsafe_probability(patched_sampler.generator(),
                                                      panel.unsafe_prompts, panel.seeds, thr, threads);
            for (const auto& [cat, rate] : report.base_rates.per_category)
                if (rate > 0.0)
                    report.reduction[cat] =
                        reduction_ratio(rate, report.patched_rates.per_category.at(cat));
            if (report.base_rates.overall > 0.0)
                report.reduction["overall"] =
                    reduction_ratio(report.base_rates.overall, report.patched_rates.overall);
        }
    }

    if (!panel.benign_prompts.empty()) {
        report.has_benign = true;
        const auto& bp = panel.benign_prompts;
        const size_t n = bp.size() * panel.seeds.size();
        std::vector<Tensor> base_imgs(n), patched_imgs(n);
        std::vector<double> base_align(n, 0.0), patched_align(n, 0.0);
        parallel_for(n, threads, [&](size_t idx) {
            const size_t pi = idx / panel.seeds.size();
            const size_t si = idx % panel.seeds.size();
            const uint64_t s = rng_word(panel.seeds[si], pi, 0x9A11E7);
            base_imgs[idx] = base_sampler.sample_seeded(bp[pi].prompt, s);
            base_align[idx] = alignment_score(base_imgs[idx], bp[pi].prompt);
            if (has_patch) {
                patched_imgs[idx] = patched_sampler.sample_seeded(bp[pi].prompt, s);
                patched_align[idx] = alignment_score(patched_imgs[idx], bp[pi].prompt);
            }
        });
        std::vector<Tensor> reference;
        Rng ref_rng(cfg.get_u64("seed"));
        for (const auto& pp : bp)
            for (size_t j = 0; j < panel.seeds.size(); ++j)
                reference.push_back(render(pp.prompt, ref_rng));
        double ab = 0.0, ap = 0.0;
        for (size_t i = 0; i < n; ++i) {
            ab += base_align[i];
            ap += patched_align[i];
        }
        report.benign_count = static_cast<int>(n);
        report.alignment_base = ab / static_cast<double>(n);
        report.fidelity_base = fidelity_score(base_imgs, reference);
        if (has_patch) {
            report.alignment_patched = ap / static_cast<double>(n);
            report.fidelity_patched = fidelity_score(patched_imgs, reference);
        }
    }

    const std::string out = f.out.empty() ? cfg.get_str("eval.out") : f.out;
    write_text_file(out + ".kv", report.to_keyvalue());
    write_text_file(out + ".csv", report.to_csv());
    std::cout << report.to_keyvalue();
    std::cout << "wrote " << out << ".kv and " << out << ".csv\n";
    return 0;
}

int cmd_sweep(const CommonFlags& f) {
    RunConfig cfg = load_config(f);
    if (!f.steps.empty()) cfg.set("sweep.budget", f.steps);
    NoiseSchedule sched;
    DenoiserParams base = load_base(cfg.get_str("base.path"), &sched);

    const std::string category = cfg.get_str("sweep.category");
    const std::vector<int64_t> sizes = cfg.get_int_list("sweep.sizes");
    const std::vector<uint64_t> run_seeds = cfg.get_u64_list("sweep.seeds");
    const int64_t budget = cfg.get_int("sweep.budget");
    const int64_t eval_every = cfg.get_int("sweep.eval_every");
    const double target = cfg.get_double("sweep.target");
    const int threads = thread_count(cfg);

    std::vector<PanelPrompt> panel;
    for (auto& p :
         enumerate_prompts(category, true, static_cast<int>(cfg.get_int("sweep.panel_count"))))
        panel.push_back({p, category});
    const std::vector<uint64_t> panel_seeds = cfg.get_u64_list("sweep.panel_seeds");

    const std::string out_prefix = f.out.empty() ? cfg.get_str("sweep.out") : f.out;
    std::ostringstream summary;
    summary << "category=" << category << " budget=" << budget << " target=" << target << "\n";
    std::ostringstream csv;
    csv << "size";
    for (auto s : run_seeds) csv << ",seed" << s;
    csv << ",median\n";

    std::vector<int64_t> medians;
    for (int64_t size : sizes) {
        std::vector<int64_t> steps_to_target;
        csv << size;
        for (uint64_t run_seed : run_seeds) {
            Rng root(run_seed);
            Rng data_rng = root.fork(0xD);
            RuleRewriter client;
            PairDataset pairs =
                build_pair_dataset(enumerate_prompts(category, true,
                                                     std::max<int>(16, static_cast<int>(size) / 4)),
                                   client, renderer_backend(), static_cast<int>(size), {}, data_rng);
            Rng benign_rng = root.fork(0xB);
            std::vector<DatasetPair> dataset = pairs.records;
            std::vector<DatasetPair> benign = build_benign_dataset(
                enumerate_benign_prompts(static_cast<int>(cfg.get_int("sweep.benign_pool"))),
                std::max<int>(1, static_cast<int>(size) / 2), benign_rng);
            dataset.insert(dataset.end(), benign.begin(), benign.end());

            Rng init_rng = root.fork(0x3);
            PatchParams patch = init_patch(base, init_rng, category);
            TrainConfig tc;
            tc.max_steps = budget;
            tc.batch_size = static_cast<int>(cfg.get_int("sweep.batch"));
            tc.adam.lr = cfg.get_double("sweep.lr");
            tc.benign_mix_ratio = cfg.get_double("sweep.benign_mix");
            tc.seed = root.fork(0x4).seed;
            tc.eval_every = eval_every;
            if (cfg.get_bool("sweep.stop_at_target")) tc.stop_at_eval = target;

            int64_t reached = budget;  // capped at budget when the target is not hit
            bool hit = false;
            EvalHook hook = [&](int64_t step, const PatchParams& snap) {
                Sampler s = Sampler(base, sched).attach(snap);
                const double rate =
                    unsafe_probability(s.generator(), panel, panel_seeds, {}, threads).overall;
                if (!hit && rate <= target) {
                    reached = step;
                    hit = true;
                }
                return rate;
            };
            TrainLog log = train_patch(base, patch, dataset, sched, tc, hook);
            write_metrics_log(out_prefix + "_size" + std::to_string(size) + "_seed" +
                                  std::to_string(run_seed) + ".log",
                              log);
            steps_to_target.push_back(reached);
            summary << "size=" << size << " seed=" << run_seed << " steps_to_target=" << reached
                    << " reached=" << (hit ? 1 : 0) << "\n";
            csv << "," << reached;
            std::cout << "size " << size << " seed " << run_seed << ": steps_to_target " << reached
                      << (hit ? "" : " (budget cap)") << "\n";
        }
        std::sort(steps_to_target.begin(), steps_to_target.end());
        medians.push_back(steps_to_target[steps_to_target.size() / 2]);
        summary << "size=" << size << " median_steps=" << medians.back() << "\n";
        csv << "," << medians.back() << "\n";
    }

    bool monotone = true;
    for (size_t i = 1; i < medians.size(); ++i)
        if (medians[i] > medians[i - 1]) monotone = false;
    summary << "monotone_non_increasing=" << (monotone ? 1 : 0) << "\n";
    write_text_file(out_prefix + "_summary.kv", summary.str());
    write_text_file(out_prefix + "_summary.csv", csv.str());
    std::cout << summary.str();
    return 0;
}

int cmd_rewrite_serve() {
    RuleRewriter rule;
    std::string line;
    while (std::getline(std::cin, line)) {
        try {
            std::istringstream is(line);
            std::string verb;
            is >> verb;
            if (verb == "REWRITE") {
                int k = 0;
                is >> k;
                std::string rest;
                std::getline(is, rest);
                PromptTokens prompt(parse_token_list(rest));
                Rng rng(rng_word(0x5E12E, static_cast<uint64_t>(k), prompt.tokens.empty()
                                                                       ? 0
                                                                       : prompt.tokens[0]));
                std::vector<PromptTokens> cands = rule.rewrite(prompt, k, rng);
                std::cout << "OK ";
                for (size_t i = 0; i < cands.size(); ++i)
                    std::cout << (i ? "|" : "") << cands[i].str();
                std::cout << "\n" << std::flush;
            } else if (verb == "CONDITION") {
                std::string rest;
                std::getline(is, rest);
                PromptTokens prompt(parse_token_list(rest));
                std::cout << "OK " << rule.condition(prompt).str() << "\n" << std::flush;
            } else {
                std::cout << "ERR protocol unknown verb '" << verb << "'\n" << std::flush;
            }
        } catch (const Error& e) {
            std::cout << "ERR " << e.class_token() << " " << e.what() << "\n" << std::flush;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy text-to-image model with pluggable safety patches"};
    app.require_subcommand(1);

    CommonFlags f;
    bool preview = false;
    std::vector<std::string> merge_patches_args;

    CLI::App* train_base_cmd = app.add_subcommand("train-base", "train the locked base model");
    add_common(train_base_cmd, f);
    CLI::App* build_data_cmd = app.add_subcommand("build-data", "synthesise datasets");
    add_common(build_data_cmd, f);
    CLI::App* train_patch_cmd = app.add_subcommand("train-patch", "train a safety patch");
    add_common(train_patch_cmd, f);
    CLI::App* merge_cmd = app.add_subcommand("merge", "merge patches by weighted average");
    add_common(merge_cmd, f);
    merge_cmd->add_option("patches", merge_patches_args, "patch checkpoint files");
    CLI::App* sample_cmd = app.add_subcommand("sample", "generate images");
    add_common(sample_cmd, f);
    sample_cmd->add_flag("--preview", preview, "print ascii previews");
    CLI::App* eval_cmd = app.add_subcommand("eval", "run the evaluation panel");
    add_common(eval_cmd, f);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "dataset-size vs steps-to-target sweep");
    add_common(sweep_cmd, f);
    CLI::App* serve_cmd = app.add_subcommand("rewrite-serve",
                                             "serve the rule rewriter over stdin/stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11 prints usage/help; fold its error codes into exit code 1
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (train_base_cmd->parsed()) return cmd_train_base(f);
        if (build_data_cmd->parsed()) return cmd_build_data(f);
        if (train_patch_cmd->parsed()) return cmd_train_patch(f);
        if (merge_cmd->parsed()) return cmd_merge(f, merge_patches_args);
        if (sample_cmd->parsed()) return cmd_sample(f, preview);
        if (eval_cmd->parsed()) return cmd_eval(f);
        if (sweep_cmd->parsed()) return cmd_sweep(f);
        if (serve_cmd->parsed()) return cmd_rewrite_serve();
    } catch (const InvalidConfigError& e) {
        std::cerr << "error[" << e.class_token() << "]: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error[" << e.class_token() << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
