// Command-line front end: synth | train | eval | ablate | plot.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "retfuse/checkpoint.hpp"
#include "retfuse/dataset.hpp"
#include "retfuse/errors.hpp"
#include "retfuse/harness.hpp"
#include "retfuse/plots.hpp"
#include "retfuse/split.hpp"
#include "retfuse/structured.hpp"
#include "retfuse/synth.hpp"
#include "retfuse/tokenizer.hpp"
#include "retfuse/trainer.hpp"

namespace fs = std::filesystem;
using namespace retfuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    if (!out) throw IoError("cannot write " + path);
}

int run_synth(const std::string& out_dir, const SynthOptions& opts) {
    ensure_out_dir(out_dir);
    auto res = generate_synthetic_dataset(out_dir, opts);
    std::printf("wrote %s\n", res.manifest_path.c_str());
    std::printf("wrote %s\n", res.templates_path.c_str());
    std::printf("wrote %s\n", res.vocab_path.c_str());
    return kExitOk;
}

int run_train(const RunConfig& cfg) {
    cfg.validate();
    ensure_out_dir(cfg.out_dir);
    cfg.save((fs::path(cfg.out_dir) / "resolved_config.txt").string());

    auto p = prepare_run(cfg);
    std::printf("train/val/test samples: %zu/%zu/%zu\n", p.train.samples.size(), p.val.samples.size(),
                p.test.samples.size());
    {
        torch::manual_seed(cfg.train.seed);
        MultimodalModel probe(cfg, static_cast<int64_t>(p.vocab.size()));
        std::printf("parameters: %lld total, %lld trainable\n",
                    static_cast<long long>(parameter_count(probe, false)),
                    static_cast<long long>(parameter_count(probe, true)));
    }

    auto result = fit(cfg, p.train, p.val, p.vocab);
    auto ckpt_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    save_checkpoint(ckpt_path, result.best);
    write_history_csv((fs::path(cfg.out_dir) / "history.csv").string(), result.history);
    std::printf("stopped after epoch %lld, best val %.6f, checkpoint %s\n",
                static_cast<long long>(result.stopped_epoch), result.best.best_val, ckpt_path.c_str());
    return kExitOk;
}

int run_eval(const std::string& checkpoint_path, const std::string& manifest_path,
             const std::string& templates_path, const std::string& out_dir, const std::string& protocol,
             bool zero_shot) {
    ensure_out_dir(out_dir);
    auto ckpt = load_checkpoint(checkpoint_path);
    auto mode = protocol == "isolated" ? RetrievalMode::isolated : RetrievalMode::paired;
    auto templates = templates_path.empty() ? load_templates(ckpt.config.templates_path)
                                            : load_templates(templates_path);

    RetrievalReport retrieval;
    ClassificationReport classification;
    if (zero_shot) {
        // whole external manifest, training-split stats from the checkpoint
        retrieval = zero_shot_transfer(ckpt, manifest_path, templates, mode);
        auto manifest = load_manifest(manifest_path);
        auto tokenizer = Tokenizer::from_tokens(ckpt.vocab_tokens);
        auto ds = prepare_dataset(manifest, templates, tokenizer, ckpt.stats, ckpt.config,
                                  manifest_dir(manifest_path));
        auto model = model_from_checkpoint(ckpt);
        classification = evaluate_classification(model, ds);
    } else {
        auto cfg = ckpt.config;
        cfg.manifest_path = manifest_path;
        auto manifest = load_manifest(manifest_path);
        auto split = patient_split(manifest.records, {0.8, 0.1, 0.1}, cfg.train.seed);
        Manifest sub;
        sub.label_vocabulary = manifest.label_vocabulary;
        sub.records = records_in_split(manifest.records, split, Split::test);
        auto tokenizer = Tokenizer::from_tokens(ckpt.vocab_tokens);
        auto ds = prepare_dataset(sub, templates, tokenizer, ckpt.stats, cfg, manifest_dir(manifest_path));
        auto model = model_from_checkpoint(ckpt);
        retrieval = evaluate_retrieval(model, ds, mode);
        classification = evaluate_classification(model, ds);
    }

    write_text((fs::path(out_dir) / "retrieval.json").string(), retrieval.to_json() + "\n");
    write_text((fs::path(out_dir) / "classification.json").string(), classification.to_json() + "\n");
    for (const auto& [k, v] : retrieval.recall_at) std::printf("R@%d = %.2f%%\n", k, v);
    std::printf("sdrg accuracy %.2f%%, icdr accuracy %.2f%%\n", classification.sdrg_accuracy,
                classification.icdr_accuracy);
    return kExitOk;
}

int run_ablate(const RunConfig& cfg, const std::string& axis) {
    cfg.validate();
    ensure_out_dir(cfg.out_dir);
    auto p = prepare_run(cfg);
    auto cells = run_ablation(cfg, axis, p.train, p.val, p.test, p.vocab);
    auto csv = (fs::path(cfg.out_dir) / ("ablation_" + axis + ".csv")).string();
    write_ablation_csv(csv, cells);
    write_ablation_json((fs::path(cfg.out_dir) / ("ablation_" + axis + ".json")).string(), cells);
    std::printf("wrote %s\n", csv.c_str());
    for (const auto& c : cells)
        std::printf("  %-28s %s\n", c.name.c_str(), c.failed ? ("FAILED: " + c.error).c_str() : "ok");
    return kExitOk;
}

int run_plot(const std::string& history_path, const std::string& retrieval_path,
             const std::string& classification_path, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    if (!history_path.empty()) {
        auto history = read_history_csv(history_path);
        plot_history(history, (fs::path(out_dir) / "loss_curves.png").string(),
                     (fs::path(out_dir) / "weight_trajectories.png").string());
        std::printf("wrote loss_curves.png and weight_trajectories.png\n");
    }
    auto read_json = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw MissingFile("cannot open " + path);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    if (!retrieval_path.empty()) {
        auto rep = RetrievalReport::from_json(read_json(retrieval_path));
        plot_recall_bars(rep, (fs::path(out_dir) / "recall_bars.png").string());
        std::printf("wrote recall_bars.png\n");
    }
    if (!classification_path.empty()) {
        auto rep = ClassificationReport::from_json(read_json(classification_path));
        plot_confusion(rep, (fs::path(out_dir) / "confusion.png").string());
        std::printf("wrote confusion.png\n");
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal retinal fusion toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    std::string synth_out;
    SynthOptions synth_opts;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--patients", synth_opts.n_patients, "number of patients");
    synth->add_option("--exams", synth_opts.exams_per_patient, "exams per patient");
    synth->add_option("--side", synth_opts.image_side, "image side in pixels");
    synth->add_option("--seed", synth_opts.seed, "generation seed");

    // common train/ablate options
    std::string config_path, manifest_path, templates_path, vocab_path, out_dir;
    std::optional<uint64_t> seed_opt;
    auto add_run_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key=value lines)");
        cmd->add_option("--manifest", manifest_path, "manifest CSV");
        cmd->add_option("--templates", templates_path, "label,sentence template CSV");
        cmd->add_option("--vocab", vocab_path, "tokenizer vocabulary (one token per line)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed_opt, "training seed override");
    };
    auto resolve_config = [&]() {
        RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        if (!manifest_path.empty()) cfg.manifest_path = manifest_path;
        if (!templates_path.empty()) cfg.templates_path = templates_path;
        if (!vocab_path.empty()) cfg.vocab_path = vocab_path;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_opt) cfg.train.seed = *seed_opt;
        if (cfg.manifest_path.empty()) throw ConfigError("--manifest (or config manifest_path) is required");
        if (cfg.templates_path.empty()) throw ConfigError("--templates (or config templates_path) is required");
        if (cfg.out_dir.empty()) throw ConfigError("--out (or config out_dir) is required");
        return cfg;
    };

    auto* train = app.add_subcommand("train", "fit the joint model");
    add_run_options(train);

    auto* ablate = app.add_subcommand("ablate", "run a modality or loss ablation");
    add_run_options(ablate);
    std::string axis = "modality";
    ablate->add_option("--axis", axis, "ablation axis")->check(CLI::IsMember({"modality", "loss"}));

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string checkpoint_path, protocol = "paired";
    bool zero_shot = false;
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--manifest", manifest_path, "manifest CSV")->required();
    eval->add_option("--templates", templates_path, "template CSV (defaults to the training one)");
    eval->add_option("--out", out_dir, "output directory")->required();
    eval->add_option("--protocol", protocol, "retrieval protocol")
        ->check(CLI::IsMember({"paired", "isolated"}));
    eval->add_flag("--zero-shot", zero_shot, "evaluate the whole manifest as an external transfer set");

    auto* plot = app.add_subcommand("plot", "render charts from run artifacts");
    std::string history_path, retrieval_json, classification_json;
    plot->add_option("--history", history_path, "history.csv from a training run");
    plot->add_option("--retrieval", retrieval_json, "retrieval.json from an evaluation");
    plot->add_option("--classification", classification_json, "classification.json from an evaluation");
    plot->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        torch::set_num_threads(1);
        if (synth->parsed()) return run_synth(synth_out, synth_opts);
        if (train->parsed()) return run_train(resolve_config());
        if (ablate->parsed()) return run_ablate(resolve_config(), axis);
        if (eval->parsed())
            return run_eval(checkpoint_path, manifest_path, templates_path, out_dir, protocol, zero_shot);
        if (plot->parsed()) return run_plot(history_path, retrieval_json, classification_json, out_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const IncompatibleConfig& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const MissingFile& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const DecodeError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const EmptySplit& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const EmptyDataset& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const UnknownLabel& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
