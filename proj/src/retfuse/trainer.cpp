#include "retfuse/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

#include "retfuse/errors.hpp"
#include "retfuse/image_ops.hpp"

namespace retfuse {

Presence enabled_modalities(const TrainConfig& cfg) {
    return Presence{cfg.use_image, cfg.use_text, cfg.use_structured};
}

std::array<bool, 6> enabled_losses(const TrainConfig& cfg) {
    std::array<bool, 6> e{};
    e[kImgTxt] = cfg.loss_img_txt && cfg.use_image && cfg.use_text;
    e[kImgStr] = cfg.loss_img_str && cfg.use_image && cfg.use_structured;
    e[kTxtStr] = cfg.loss_txt_str && cfg.use_text && cfg.use_structured;
    e[kRecImg] = cfg.loss_rec_img && cfg.use_image;
    e[kRecTxt] = cfg.loss_rec_txt && cfg.use_text;
    e[kCls] = cfg.loss_cls;
    return e;
}

namespace {

torch::Tensor l2norm(const torch::Tensor& t) {
    return torch::nn::functional::normalize(t, torch::nn::functional::NormalizeFuncOptions().dim(-1));
}

} // namespace

LossBreakdown compute_losses(MultimodalModel& model, const BatchInput& batch, const RunConfig& cfg) {
    auto presence = enabled_modalities(cfg.train);
    auto enabled = enabled_losses(cfg.train);
    bool any_contrastive = enabled[kImgTxt] || enabled[kImgStr] || enabled[kTxtStr];
    if (any_contrastive && batch.sdrg.size(0) < 2)
        throw Error("contrastive terms need a batch of at least 2 (got " +
                    std::to_string(batch.sdrg.size(0)) + ")");

    bool run_decoders = enabled[kRecImg] || enabled[kRecTxt];
    auto fwd = model->forward(batch, presence, run_decoders);

    std::array<torch::Tensor, 6> comps;
    const double tau = cfg.temperature;
    // each contrastive term averages two views: single-modality passes (so the
    // embeddings stay discriminative when a modality arrives alone) and the
    // fused-pass CLS tokens (the embeddings paired retrieval reads out)
    torch::Tensor img_e, txt_e, str_e;
    if (enabled[kImgTxt] || enabled[kImgStr])
        img_e = l2norm(model->forward(batch, Presence{true, false, false}, false).fusion.img_cls);
    if (enabled[kImgTxt] || enabled[kTxtStr])
        txt_e = l2norm(model->forward(batch, Presence{false, true, false}, false).fusion.txt_cls);
    if (enabled[kImgStr] || enabled[kTxtStr])
        str_e = l2norm(model->forward(batch, Presence{false, false, true}, false).fusion.str_cls);
    auto both = [&](const torch::Tensor& iso_a, const torch::Tensor& iso_b, const torch::Tensor& fused_a,
                    const torch::Tensor& fused_b) {
        return 0.5 * (contrastive_loss(iso_a, iso_b, tau) +
                      contrastive_loss(l2norm(fused_a), l2norm(fused_b), tau));
    };
    if (enabled[kImgTxt]) comps[kImgTxt] = both(img_e, txt_e, fwd.fusion.img_cls, fwd.fusion.txt_cls);
    if (enabled[kImgStr]) comps[kImgStr] = both(img_e, str_e, fwd.fusion.img_cls, fwd.fusion.str_cls);
    if (enabled[kTxtStr]) comps[kTxtStr] = both(txt_e, str_e, fwd.fusion.txt_cls, fwd.fusion.str_cls);
    if (enabled[kRecImg]) comps[kRecImg] = reconstruction_image_loss(fwd.image_recon, batch.recon_target);
    if (enabled[kRecTxt]) comps[kRecTxt] = reconstruction_text_loss(fwd.text_logits, batch.text_ids, batch.text_mask);
    if (enabled[kCls])
        comps[kCls] = classification_loss(fwd.fusion.sdrg_logits, fwd.fusion.icdr_logits, batch.sdrg, batch.icdr);

    return total_loss(model->alphas, comps, enabled);
}

std::vector<torch::Tensor> trainable_parameters(const MultimodalModel& model) {
    std::vector<torch::Tensor> out;
    for (const auto& p : model->parameters())
        if (p.requires_grad()) out.push_back(p);
    return out;
}

int64_t parameter_count(const MultimodalModel& model, bool trainable_only) {
    int64_t n = 0;
    for (const auto& p : model->parameters())
        if (!trainable_only || p.requires_grad()) n += p.numel();
    return n;
}

LossBreakdown train_step(MultimodalModel& model, torch::optim::AdamW& optimizer, const BatchInput& batch,
                         const RunConfig& cfg) {
    model->train();
    auto breakdown = compute_losses(model, batch, cfg);
    if (!std::isfinite(breakdown.total))
        throw NonFiniteLoss("training loss is non-finite at total=" + std::to_string(breakdown.total));
    optimizer.zero_grad();
    breakdown.total_tensor.backward();
    torch::nn::utils::clip_grad_norm_(trainable_parameters(model), cfg.train.clip_norm);
    optimizer.step();
    return breakdown;
}

FitResult fit(const RunConfig& cfg, const PreparedDataset& train_ds, const PreparedDataset& val_ds,
              const std::vector<std::string>& vocab_tokens) {
    if (train_ds.samples.empty()) throw EmptyDataset("training split is empty");
    if (val_ds.samples.empty()) throw EmptyDataset("validation split is empty");

    torch::set_num_threads(1);
    torch::manual_seed(cfg.train.seed);
    MultimodalModel model(cfg, static_cast<int64_t>(vocab_tokens.size()));
    torch::optim::AdamW optimizer(trainable_parameters(model),
                                  torch::optim::AdamWOptions(cfg.train.learning_rate)
                                      .weight_decay(cfg.train.weight_decay));

    auto batches_of = [&](size_t n, std::vector<size_t> order) {
        std::vector<std::vector<size_t>> batches;
        for (size_t i = 0; i < n; i += cfg.train.batch_size) {
            size_t end = std::min(n, i + static_cast<size_t>(cfg.train.batch_size));
            batches.emplace_back(order.begin() + i, order.begin() + end);
        }
        // fold a trailing singleton into the previous batch so contrastive
        // terms always see at least two samples
        if (batches.size() > 1 && batches.back().size() == 1) {
            batches[batches.size() - 2].push_back(batches.back()[0]);
            batches.pop_back();
        }
        return batches;
    };

    auto validate = [&]() {
        model->eval();
        torch::NoGradGuard ng;
        std::vector<size_t> order(val_ds.samples.size());
        std::iota(order.begin(), order.end(), 0);
        double total = 0;
        size_t count = 0;
        for (const auto& bidx : batches_of(order.size(), order)) {
            auto batch = make_batch(val_ds, bidx, /*augment=*/false, 0);
            auto b = compute_losses(model, batch, cfg);
            total += b.total * static_cast<double>(bidx.size());
            count += bidx.size();
        }
        return total / static_cast<double>(count);
    };

    FitResult result;
    double best_val = std::numeric_limits<double>::infinity();
    double lr = cfg.train.learning_rate;
    int64_t plateau = 0, stale = 0, global_step = 0;
    bool step_cap_hit = false;

    for (int64_t epoch = 1; epoch <= cfg.train.max_epochs && !step_cap_hit; ++epoch) {
        std::vector<size_t> order(train_ds.samples.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(child_seed(cfg.train.seed, 1000 + static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        uint64_t aug_seed = child_seed(cfg.train.seed, static_cast<uint64_t>(epoch));
        size_t steps_this_epoch = 0;
        for (const auto& bidx : batches_of(order.size(), order)) {
            if (cfg.train.max_steps > 0 && global_step >= cfg.train.max_steps) {
                step_cap_hit = true;
                break;
            }
            auto batch = make_batch(train_ds, bidx, /*augment=*/true, aug_seed);
            auto b = train_step(model, optimizer, batch, cfg);
            for (int i = 0; i < 6; ++i) {
                rec.components[i] += b.components[i];
                rec.weights[i] += b.weights[i];
            }
            rec.train_total += b.total;
            ++steps_this_epoch;
            ++global_step;
        }
        if (steps_this_epoch == 0) break;
        for (int i = 0; i < 6; ++i) {
            rec.components[i] /= static_cast<double>(steps_this_epoch);
            rec.weights[i] /= static_cast<double>(steps_this_epoch);
        }
        rec.train_total /= static_cast<double>(steps_this_epoch);

        rec.val_total = validate();
        if (!std::isfinite(rec.val_total)) throw NonFiniteLoss("validation loss is non-finite");
        result.history.push_back(rec);
        result.stopped_epoch = epoch;

        bool improved = rec.val_total < best_val * (1.0 - cfg.train.improve_threshold);
        if (improved) {
            best_val = rec.val_total;
            plateau = 0;
            stale = 0;
            result.best = snapshot(model, &optimizer, epoch, best_val, train_ds.stats, vocab_tokens);
        } else {
            ++plateau;
            ++stale;
            if (plateau >= cfg.train.scheduler_patience) {
                lr *= cfg.train.scheduler_factor;
                for (auto& group : optimizer.param_groups())
                    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
                plateau = 0;
            }
            if (stale >= cfg.train.early_stop_patience) break;
        }
    }

    if (result.best.params.empty())
        result.best = snapshot(model, &optimizer, result.stopped_epoch, best_val, train_ds.stats, vocab_tokens);
    return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history: " + path);
    out << "epoch,lr,l_img_txt,l_img_str,l_txt_str,l_rec_img,l_rec_txt,l_cls,"
           "w_img_txt,w_img_str,w_txt_str,w_rec_img,w_rec_txt,w_cls,train_total,val_total\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (const auto& r : history) {
        out << r.epoch << "," << num(r.lr);
        for (double c : r.components) out << "," << num(c);
        for (double w : r.weights) out << "," << num(w);
        out << "," << num(r.train_total) << "," << num(r.val_total) << "\n";
    }
}

} // namespace retfuse
