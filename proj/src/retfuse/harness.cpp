#include "retfuse/harness.hpp"

#include <fstream>

#include <json.hpp>

#include "retfuse/errors.hpp"

namespace retfuse {

namespace {

constexpr int64_t kEvalBatch = 16;

std::vector<std::vector<size_t>> eval_batches(size_t n) {
    std::vector<std::vector<size_t>> batches;
    for (size_t i = 0; i < n; i += kEvalBatch) {
        std::vector<size_t> b;
        for (size_t j = i; j < std::min(n, i + static_cast<size_t>(kEvalBatch)); ++j) b.push_back(j);
        batches.push_back(std::move(b));
    }
    return batches;
}

} // namespace

std::pair<torch::Tensor, torch::Tensor> embed_split(MultimodalModel& model, const PreparedDataset& split,
                                                    RetrievalMode mode, const Presence& presence) {
    model->eval();
    torch::NoGradGuard ng;
    std::vector<torch::Tensor> imgs, txts;
    for (const auto& bidx : eval_batches(split.samples.size())) {
        auto batch = make_batch(split, bidx, /*augment=*/false, 0);
        auto [img, txt] = model->embed_for_retrieval(batch, mode, presence);
        imgs.push_back(img);
        txts.push_back(txt);
    }
    return {torch::cat(imgs, 0), torch::cat(txts, 0)};
}

RetrievalReport evaluate_retrieval(MultimodalModel& model, const PreparedDataset& split,
                                   RetrievalMode mode, const Presence& presence, bool zero_shot) {
    if (split.samples.empty()) throw EmptySplit("retrieval evaluation needs a nonempty split");
    auto [gallery, queries] = embed_split(model, split, mode, presence);
    std::vector<int64_t> matches(split.samples.size());
    for (size_t i = 0; i < matches.size(); ++i) matches[i] = static_cast<int64_t>(i);

    RetrievalReport rep;
    rep.protocol = mode == RetrievalMode::paired ? "paired" : "isolated";
    rep.gallery_size = gallery.size(0);
    rep.zero_shot = zero_shot;
    for (int64_t k : {1, 5, 10})
        if (k <= rep.gallery_size) rep.recall_at[static_cast<int>(k)] = recall_at_k(queries, gallery, matches, k);
    return rep;
}

ClassificationReport evaluate_classification(MultimodalModel& model, const PreparedDataset& split,
                                             const Presence& presence) {
    if (split.samples.empty()) throw EmptySplit("classification evaluation needs a nonempty split");
    model->eval();
    torch::NoGradGuard ng;
    ClassificationReport rep;
    int64_t correct_sdrg = 0, correct_icdr = 0, total = 0;
    for (const auto& bidx : eval_batches(split.samples.size())) {
        auto batch = make_batch(split, bidx, /*augment=*/false, 0);
        auto fwd = model->forward(batch, presence, /*run_decoders=*/false);
        for (int64_t i = 0; i < batch.sdrg.size(0); ++i) {
            int64_t ps = argmax5(fwd.fusion.sdrg_logits[i]);
            int64_t pi = argmax5(fwd.fusion.icdr_logits[i]);
            int64_t ts = batch.sdrg[i].item<int64_t>();
            int64_t ti = batch.icdr[i].item<int64_t>();
            rep.confusion_sdrg[ts][ps]++;
            rep.confusion_icdr[ti][pi]++;
            correct_sdrg += ps == ts;
            correct_icdr += pi == ti;
            ++total;
        }
    }
    rep.sdrg_accuracy = 100.0 * static_cast<double>(correct_sdrg) / static_cast<double>(total);
    rep.icdr_accuracy = 100.0 * static_cast<double>(correct_icdr) / static_cast<double>(total);
    return rep;
}

std::vector<AblationCell> run_ablation(const RunConfig& base, const std::string& axis,
                                       const PreparedDataset& train_ds, const PreparedDataset& val_ds,
                                       const PreparedDataset& eval_ds,
                                       const std::vector<std::string>& vocab_tokens) {
    struct CellSpec {
        std::string name;
        RunConfig cfg;
    };
    std::vector<CellSpec> cells;
    auto with = [&](const std::string& name, auto&& mutate) {
        RunConfig c = base;
        mutate(c.train);
        cells.push_back({name, c});
    };
    if (axis == "modality") {
        with("image_text", [](TrainConfig& t) { t.use_structured = false; });
        with("image_structured", [](TrainConfig& t) { t.use_text = false; });
        with("text_structured", [](TrainConfig& t) { t.use_image = false; });
        with("all_modalities", [](TrainConfig&) {});
    } else if (axis == "loss") {
        auto only = [](TrainConfig& t, bool contrastive, bool recon) {
            t.loss_img_txt = t.loss_img_str = t.loss_txt_str = contrastive;
            t.loss_rec_img = t.loss_rec_txt = recon;
            t.loss_cls = true;
        };
        with("classification_only", [&](TrainConfig& t) { only(t, false, false); });
        with("classification_contrastive", [&](TrainConfig& t) { only(t, true, false); });
        with("classification_reconstruction", [&](TrainConfig& t) { only(t, false, true); });
        with("full", [&](TrainConfig& t) { only(t, true, true); });
    } else {
        throw ConfigError("unknown ablation axis '" + axis + "' (expected modality or loss)");
    }

    std::vector<AblationCell> out;
    for (const auto& cell : cells) {
        AblationCell result;
        result.name = cell.name;
        try {
            auto fitres = fit(cell.cfg, train_ds, val_ds, vocab_tokens);
            auto model = model_from_checkpoint(fitres.best);
            auto presence = enabled_modalities(cell.cfg.train);
            // isolated mode: paired embeddings share one fused pass, which lets
            // any objective leak image identity into the text CLS and would
            // mask the contribution of the contrastive terms
            if (presence.image && presence.text)
                result.retrieval = evaluate_retrieval(model, eval_ds, RetrievalMode::isolated, presence);
            result.classification = evaluate_classification(model, eval_ds, presence);
        } catch (const std::exception& e) {
            result.failed = true;
            result.error = e.what();
        }
        out.push_back(std::move(result));
    }
    return out;
}

namespace {

std::string cell_recall(const AblationCell& c, int k) {
    if (!c.retrieval || !c.retrieval->recall_at.count(k)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", c.retrieval->recall_at.at(k));
    return buf;
}

std::string cell_acc(const AblationCell& c, bool sdrg) {
    if (!c.classification) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", sdrg ? c.classification->sdrg_accuracy : c.classification->icdr_accuracy);
    return buf;
}

} // namespace

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ablation table: " + path);
    out << "configuration,r_at_1,r_at_5,r_at_10,sdrg_accuracy,icdr_accuracy,error\n";
    for (const auto& c : cells) {
        out << c.name << "," << cell_recall(c, 1) << "," << cell_recall(c, 5) << "," << cell_recall(c, 10)
            << "," << cell_acc(c, true) << "," << cell_acc(c, false) << "," << (c.failed ? c.error : "")
            << "\n";
    }
}

void write_ablation_json(const std::string& path, const std::vector<AblationCell>& cells) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json j;
        j["configuration"] = c.name;
        if (c.retrieval) j["retrieval"] = nlohmann::json::parse(c.retrieval->to_json());
        if (c.classification) j["classification"] = nlohmann::json::parse(c.classification->to_json());
        if (c.failed) j["error"] = c.error;
        rows.push_back(j);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write ablation table: " + path);
    out << rows.dump(2) << "\n";
}

RunInputs prepare_run(const RunConfig& cfg) {
    RunInputs r;
    auto manifest = load_manifest(cfg.manifest_path);
    r.templates = load_templates(cfg.templates_path);
    if (!cfg.vocab_path.empty()) {
        r.vocab = Tokenizer::from_file(cfg.vocab_path).tokens();
    } else {
        std::vector<std::string> sentences{kNoFindingsSentence};
        for (const auto& [label, sentence] : r.templates) sentences.push_back(sentence);
        r.vocab = Tokenizer::build_vocab(sentences);
    }
    auto tokenizer = Tokenizer::from_tokens(r.vocab);
    auto split = patient_split(manifest.records, {0.8, 0.1, 0.1}, cfg.train.seed);
    auto root = manifest_dir(cfg.manifest_path);

    auto build = [&](Split which, const StructuredStats* stats) {
        Manifest sub;
        sub.label_vocabulary = manifest.label_vocabulary;
        sub.records = records_in_split(manifest.records, split, which);
        StructuredStats local = stats ? *stats : fit_structured_stats(sub.records);
        return prepare_dataset(sub, r.templates, tokenizer, local, cfg, root);
    };
    r.train = build(Split::train, nullptr);
    r.val = build(Split::val, &r.train.stats);
    r.test = build(Split::test, &r.train.stats);
    return r;
}

RetrievalReport zero_shot_transfer(const CheckpointData& checkpoint, const std::string& external_manifest,
                                   const TemplateTable& templates, RetrievalMode mode) {
    auto manifest = load_manifest(external_manifest);
    auto tokenizer = Tokenizer::from_tokens(checkpoint.vocab_tokens);
    // stats come from the checkpoint's TRAINING dataset; never refit here
    auto ds = prepare_dataset(manifest, templates, tokenizer, checkpoint.stats, checkpoint.config,
                              manifest_dir(external_manifest));
    auto model = model_from_checkpoint(checkpoint);
    return evaluate_retrieval(model, ds, mode, Presence{}, /*zero_shot=*/true);
}

} // namespace retfuse
