#include "retfuse/dataset.hpp"

#include <filesystem>

#include "retfuse/errors.hpp"
#include "retfuse/image_ops.hpp"

namespace retfuse {

std::string manifest_dir(const std::string& manifest_path) {
    return std::filesystem::path(manifest_path).parent_path().string();
}

PreparedDataset prepare_dataset(const Manifest& manifest, const TemplateTable& templates,
                                const Tokenizer& tokenizer, const StructuredStats& stats,
                                const RunConfig& cfg, const std::string& image_root) {
    PreparedDataset ds;
    ds.stats = stats;
    ds.label_vocabulary = manifest.label_vocabulary;
    ds.samples.reserve(manifest.records.size());
    for (const auto& rec : manifest.records) {
        PreparedSample s;
        s.record = rec;
        std::filesystem::path img(rec.image_path);
        if (img.is_relative() && !image_root.empty()) img = std::filesystem::path(image_root) / img;
        s.image01 = preprocess_image01(decode_image(img.string()), cfg.vision.image_side);
        s.note = generate_clinical_note(rec.disease_labels, templates, manifest.label_vocabulary);
        s.text = tokenizer.encode(s.note, cfg.text.max_tokens);
        s.structured = preprocess_structured(rec, stats);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

BatchInput make_batch(const PreparedDataset& dataset, const std::vector<size_t>& indices,
                      bool augment, uint64_t base_seed) {
    if (indices.empty()) throw EmptyDataset("cannot assemble an empty batch");
    const int64_t b = static_cast<int64_t>(indices.size());
    const auto& first = dataset.samples.at(indices[0]);
    const int64_t side = first.image01.size(1);
    const int64_t lmax = static_cast<int64_t>(first.text.ids.size());

    BatchInput batch;
    batch.recon_target = torch::empty({b, 3, side, side});
    batch.text_ids = torch::empty({b, lmax}, torch::kInt64);
    batch.text_mask = torch::empty({b, lmax}, torch::kInt64);
    batch.structured = torch::empty({b, 6});
    batch.sdrg = torch::empty({b}, torch::kInt64);
    batch.icdr = torch::empty({b}, torch::kInt64);

    for (int64_t i = 0; i < b; ++i) {
        const auto& s = dataset.samples.at(indices[i]);
        auto img = s.image01;
        if (augment) {
            std::mt19937_64 rng(child_seed(base_seed, indices[i]));
            img = augment_image(img, rng);
        }
        batch.recon_target[i] = img;
        batch.text_ids[i] = torch::tensor(s.text.ids, torch::kInt64);
        batch.text_mask[i] = torch::tensor(s.text.mask, torch::kInt64);
        batch.structured[i] = torch::tensor(
            std::vector<float>(s.structured.begin(), s.structured.end()));
        batch.sdrg[i] = s.record.sdrg_grade;
        batch.icdr[i] = s.record.icdr_grade;
    }
    // standardized copy feeds the encoder; the [0,1] copy is the recon target
    batch.images = torch::empty_like(batch.recon_target);
    for (int64_t i = 0; i < b; ++i) batch.images[i] = standardize_imagenet(batch.recon_target[i]);
    return batch;
}

} // namespace retfuse
