// Python bindings for the multimodal retinal fusion toolkit.
//
// The module mirrors the CLI surface: dataset synthesis, tokenization,
// patient-level splitting, the loss/metric primitives, and the full
// train / evaluate / ablate entry points. Array-valued arguments cross the
// boundary as numpy arrays and are copied into torch tensors internally.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "retfuse/config.hpp"
#include "retfuse/dataset.hpp"
#include "retfuse/harness.hpp"
#include "retfuse/losses.hpp"
#include "retfuse/manifest.hpp"
#include "retfuse/metrics.hpp"
#include "retfuse/notes.hpp"
#include "retfuse/split.hpp"
#include "retfuse/synth.hpp"
#include "retfuse/tokenizer.hpp"
#include "retfuse/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace retfuse;

namespace {

torch::Tensor to_tensor_2d(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2-d array");
    auto t = torch::empty({arr.shape(0), arr.shape(1)}, torch::kFloat64);
    std::memcpy(t.data_ptr<double>(), arr.data(), sizeof(double) * static_cast<size_t>(t.numel()));
    return t.to(torch::kFloat32);
}

py::dict retrieval_to_dict(const RetrievalReport& rep) {
    py::dict d;
    d["protocol"] = rep.protocol;
    d["direction"] = rep.direction;
    d["gallery_size"] = rep.gallery_size;
    d["zero_shot"] = rep.zero_shot;
    py::dict recall;
    for (const auto& [k, v] : rep.recall_at) recall[py::int_(k)] = v;
    d["recall_at"] = recall;
    return d;
}

py::dict classification_to_dict(const ClassificationReport& rep) {
    py::dict d;
    d["sdrg_accuracy"] = rep.sdrg_accuracy;
    d["icdr_accuracy"] = rep.icdr_accuracy;
    auto conf = [](const std::array<std::array<int64_t, 5>, 5>& m) {
        py::list rows;
        for (const auto& r : m) {
            py::list row;
            for (int64_t v : r) row.append(v);
            rows.append(row);
        }
        return rows;
    };
    d["confusion_sdrg"] = conf(rep.confusion_sdrg);
    d["confusion_icdr"] = conf(rep.confusion_icdr);
    return d;
}

RunConfig config_from_dict(const std::map<std::string, std::string>& kv) {
    return RunConfig::from_kv(kv);
}

RetrievalMode mode_from_string(const std::string& protocol) {
    if (protocol == "paired") return RetrievalMode::paired;
    if (protocol == "isolated") return RetrievalMode::isolated;
    throw py::value_error("protocol must be 'paired' or 'isolated'");
}

} // namespace

PYBIND11_MODULE(retfuse, m) {
    m.doc() = "joint image/text/structured embedding toolkit";
    torch::set_num_threads(1);

    m.def(
        "default_config",
        []() { return RunConfig{}.to_kv(); },
        "All configuration keys with their default values, as a flat dict of strings.");

    m.def(
        "generate_dataset",
        [](const std::string& out_dir, int64_t patients, int64_t exams, int64_t side, uint64_t seed) {
            SynthOptions opts;
            opts.n_patients = patients;
            opts.exams_per_patient = exams;
            opts.image_side = side;
            opts.seed = seed;
            auto res = generate_synthetic_dataset(out_dir, opts);
            py::dict d;
            d["manifest"] = res.manifest_path;
            d["templates"] = res.templates_path;
            d["vocab"] = res.vocab_path;
            return d;
        },
        py::arg("out_dir"), py::arg("patients") = 32, py::arg("exams") = 1, py::arg("side") = 32,
        py::arg("seed") = 0,
        "Write a seeded synthetic dataset (images, manifest, templates, vocab) and return the paths.");

    m.def(
        "generate_note",
        [](const std::map<std::string, bool>& labels) {
            return generate_clinical_note(labels, synth_templates(), synth_label_vocabulary());
        },
        py::arg("labels"),
        "Deterministic clinical note for a {label: present} dict, using the built-in templates.");

    m.def(
        "label_vocabulary", []() { return synth_label_vocabulary(); },
        "Disease label names used by the synthetic generator, in label-vector order.");

    m.def(
        "build_vocab", &Tokenizer::build_vocab, py::arg("sentences"),
        "Subword vocabulary covering the given sentences (specials, words, punctuation, characters).");

    m.def(
        "tokenize",
        [](const std::string& text, const std::vector<std::string>& vocab, int64_t max_tokens) {
            auto enc = Tokenizer::from_tokens(vocab).encode(text, max_tokens);
            return py::make_tuple(enc.ids, enc.mask);
        },
        py::arg("text"), py::arg("vocab"), py::arg("max_tokens"),
        "Encode text to fixed-length (ids, mask); [CLS]...[SEP], truncated and padded.");

    m.def(
        "patient_split",
        [](const std::string& manifest_path, std::array<double, 3> ratios, uint64_t seed) {
            auto manifest = load_manifest(manifest_path);
            auto split = patient_split(manifest.records, ratios, seed);
            std::map<std::string, std::string> out;
            for (const auto& [pid, s] : split.by_patient)
                out[pid] = s == Split::train ? "train" : (s == Split::val ? "val" : "test");
            return out;
        },
        py::arg("manifest"), py::arg("ratios") = std::array<double, 3>{0.8, 0.1, 0.1},
        py::arg("seed") = 0,
        "Deterministic patient-level split; returns {patient_id: 'train'|'val'|'test'}.");

    m.def(
        "recall_at_k",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& queries,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& gallery,
           const std::vector<int64_t>& matches, int64_t k) {
            return recall_at_k(to_tensor_2d(queries), to_tensor_2d(gallery), matches, k);
        },
        py::arg("queries"), py::arg("gallery"), py::arg("matches"), py::arg("k"),
        "Recall@k (percent) for L2-normalized query/gallery rows; ties break to the lower index.");

    m.def(
        "contrastive_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& b, double tau) {
            return contrastive_loss(to_tensor_2d(a), to_tensor_2d(b), tau).item<double>();
        },
        py::arg("a"), py::arg("b"), py::arg("tau") = 0.07,
        "Symmetric InfoNCE over L2-normalized rows with in-batch negatives.");

    m.def(
        "loss_weights",
        [](const std::vector<double>& alphas, const std::vector<bool>& enabled) {
            if (alphas.size() != 6 || enabled.size() != 6)
                throw py::value_error("alphas and enabled must each have 6 entries");
            auto at = torch::tensor(std::vector<double>(alphas.begin(), alphas.end()), torch::kFloat32);
            std::array<torch::Tensor, 6> comps;
            std::array<bool, 6> en{};
            for (int i = 0; i < 6; ++i) {
                en[i] = enabled[i];
                if (en[i]) comps[i] = torch::zeros({}, torch::kFloat32);
            }
            auto breakdown = total_loss(at, comps, en);
            return std::vector<double>(breakdown.weights.begin(), breakdown.weights.end());
        },
        py::arg("alphas"), py::arg("enabled"),
        "Softmax mixture weights over the enabled loss terms (disabled terms get weight 0).");

    m.def(
        "train",
        [](const std::map<std::string, std::string>& config) {
            auto cfg = config_from_dict(config);
            cfg.validate();
            if (cfg.manifest_path.empty() || cfg.templates_path.empty() || cfg.out_dir.empty())
                throw py::value_error("config needs manifest_path, templates_path and out_dir");
            fs::create_directories(cfg.out_dir);
            auto inputs = prepare_run(cfg);
            auto result = fit(cfg, inputs.train, inputs.val, inputs.vocab);
            auto ckpt = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
            save_checkpoint(ckpt, result.best);
            write_history_csv((fs::path(cfg.out_dir) / "history.csv").string(), result.history);
            py::dict d;
            d["checkpoint"] = ckpt;
            d["history"] = (fs::path(cfg.out_dir) / "history.csv").string();
            d["stopped_epoch"] = result.stopped_epoch;
            d["best_val"] = result.best.best_val;
            d["train_samples"] = inputs.train.samples.size();
            d["val_samples"] = inputs.val.samples.size();
            d["test_samples"] = inputs.test.samples.size();
            return d;
        },
        py::arg("config"),
        "Full training run from a config dict (see default_config); writes checkpoint.bin and "
        "history.csv under out_dir and returns their paths.");

    m.def(
        "evaluate",
        [](const std::string& checkpoint, const std::string& manifest, const std::string& templates,
           const std::string& protocol, bool zero_shot) {
            auto ckpt = load_checkpoint(checkpoint);
            auto mode = mode_from_string(protocol);
            auto tmpl = templates.empty() ? load_templates(ckpt.config.templates_path)
                                          : load_templates(templates);
            RetrievalReport retrieval;
            ClassificationReport classification;
            if (zero_shot) {
                retrieval = zero_shot_transfer(ckpt, manifest, tmpl, mode);
                auto man = load_manifest(manifest);
                auto tokenizer = Tokenizer::from_tokens(ckpt.vocab_tokens);
                auto ds = prepare_dataset(man, tmpl, tokenizer, ckpt.stats, ckpt.config,
                                          manifest_dir(manifest));
                auto model = model_from_checkpoint(ckpt);
                classification = evaluate_classification(model, ds);
            } else {
                auto man = load_manifest(manifest);
                auto split = patient_split(man.records, {0.8, 0.1, 0.1}, ckpt.config.train.seed);
                Manifest sub;
                sub.label_vocabulary = man.label_vocabulary;
                sub.records = records_in_split(man.records, split, Split::test);
                auto tokenizer = Tokenizer::from_tokens(ckpt.vocab_tokens);
                auto ds = prepare_dataset(sub, tmpl, tokenizer, ckpt.stats, ckpt.config,
                                          manifest_dir(manifest));
                auto model = model_from_checkpoint(ckpt);
                retrieval = evaluate_retrieval(model, ds, mode);
                classification = evaluate_classification(model, ds);
            }
            py::dict d;
            d["retrieval"] = retrieval_to_dict(retrieval);
            d["classification"] = classification_to_dict(classification);
            return d;
        },
        py::arg("checkpoint"), py::arg("manifest"), py::arg("templates") = std::string{},
        py::arg("protocol") = std::string{"paired"}, py::arg("zero_shot") = false,
        "Retrieval + grading metrics for a checkpoint. zero_shot=True treats the whole manifest as "
        "an external transfer set; otherwise the manifest's test split is used.");

    m.def(
        "ablate",
        [](const std::map<std::string, std::string>& config, const std::string& axis) {
            auto cfg = config_from_dict(config);
            cfg.validate();
            auto inputs = prepare_run(cfg);
            auto cells = run_ablation(cfg, axis, inputs.train, inputs.val, inputs.test, inputs.vocab);
            py::list out;
            for (const auto& c : cells) {
                py::dict d;
                d["configuration"] = c.name;
                if (c.retrieval) d["retrieval"] = retrieval_to_dict(*c.retrieval);
                if (c.classification) d["classification"] = classification_to_dict(*c.classification);
                if (c.failed) d["error"] = c.error;
                out.append(d);
            }
            return out;
        },
        py::arg("config"), py::arg("axis"),
        "Run the 'modality' or 'loss' ablation grid; each cell is a full fit + evaluation.");
}
