#include "retfuse/synth.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "retfuse/errors.hpp"
#include "retfuse/image_ops.hpp"
#include "retfuse/tokenizer.hpp"

namespace retfuse {

const std::vector<std::string>& synth_label_vocabulary() {
    static const std::vector<std::string> v = {"diabetic_retinopathy", "macular_edema", "drusen",
                                               "retinal_hemorrhage"};
    return v;
}

TemplateTable synth_templates() {
    return {
        {"diabetic_retinopathy", "Diabetic retinopathy is present."},
        {"macular_edema", "Macular edema is present."},
        {"drusen", "Drusen are present."},
        {"retinal_hemorrhage", "Retinal hemorrhage is present."},
    };
}

std::vector<std::string> synth_vocab_tokens() {
    std::vector<std::string> sentences{kNoFindingsSentence};
    for (const auto& [label, sentence] : synth_templates()) sentences.push_back(sentence);
    return Tokenizer::build_vocab(sentences);
}

namespace {

// image layout: top bar (s/8 rows) encodes the grade; the body splits into
// 2x2 quadrants, one per label, bright when present
constexpr double kBase = 0.1;
constexpr double kGradeStep = 0.2;
constexpr double kQuadOn = 0.85;
constexpr double kQuadOff = 0.2;
constexpr double kNoise = 0.04;
const std::array<double, 3> kChannelScale{1.0, 0.8, 0.6};

torch::Tensor render_image(int64_t side, int grade, const std::vector<bool>& labels,
                           std::mt19937_64& rng) {
    auto img = torch::empty({3, side, side});
    auto a = img.accessor<float, 3>();
    std::uniform_real_distribution<double> noise(-kNoise, kNoise);
    const int64_t bar = side / 8;
    const int64_t mid_y = bar + (side - bar) / 2;
    const int64_t mid_x = side / 2;
    for (int64_t y = 0; y < side; ++y) {
        for (int64_t x = 0; x < side; ++x) {
            double v;
            if (y < bar) {
                v = kBase + kGradeStep * grade;
            } else {
                int quad = (y >= mid_y ? 2 : 0) + (x >= mid_x ? 1 : 0);
                v = labels[quad] ? kQuadOn : kQuadOff;
            }
            for (int c = 0; c < 3; ++c) {
                double u = v * kChannelScale[c] + noise(rng);
                a[c][y][x] = static_cast<float>(std::clamp(u, 0.0, 1.0));
            }
        }
    }
    return img;
}

} // namespace

int decode_grade(const torch::Tensor& img01) {
    const int64_t side = img01.size(1);
    const int64_t bar = side / 8;
    auto mean = img01.index({0, torch::indexing::Slice(0, bar)}).mean().item<double>();
    int g = static_cast<int>(std::lround((mean - kBase) / kGradeStep));
    return std::clamp(g, 0, 4);
}

std::vector<bool> decode_labels(const torch::Tensor& img01) {
    const int64_t side = img01.size(1);
    const int64_t bar = side / 8;
    const int64_t mid_y = bar + (side - bar) / 2;
    const int64_t mid_x = side / 2;
    using torch::indexing::Slice;
    std::vector<bool> out;
    const double threshold = 0.5 * (kQuadOn + kQuadOff);
    std::array<std::pair<Slice, Slice>, 4> quads{
        std::pair{Slice(bar, mid_y), Slice(0, mid_x)},
        std::pair{Slice(bar, mid_y), Slice(mid_x, side)},
        std::pair{Slice(mid_y, side), Slice(0, mid_x)},
        std::pair{Slice(mid_y, side), Slice(mid_x, side)},
    };
    for (const auto& [ys, xs] : quads) {
        auto mean = img01.index({0, ys, xs}).mean().item<double>();
        out.push_back(mean > threshold);
    }
    return out;
}

std::vector<SynthSample> generate_synth_samples(const SynthOptions& opts) {
    std::vector<SynthSample> out;
    const auto& vocab = synth_label_vocabulary();
    for (int64_t p = 0; p < opts.n_patients; ++p) {
        std::mt19937_64 rng(child_seed(opts.seed, static_cast<uint64_t>(p)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        int grade = static_cast<int>(unit(rng) * 5.0);
        grade = std::clamp(grade, 0, 4);
        std::vector<bool> labels(4);
        labels[0] = grade >= 1;                               // diabetic_retinopathy
        labels[1] = grade >= 2 && unit(rng) < 0.5;            // macular_edema
        labels[2] = unit(rng) < 0.3;                          // drusen
        labels[3] = unit(rng) < (grade >= 3 ? 0.7 : 0.1);     // retinal_hemorrhage

        for (int64_t e = 0; e < opts.exams_per_patient; ++e) {
            SynthSample s;
            auto& rec = s.record;
            char pid[32];
            std::snprintf(pid, sizeof(pid), "p%04lld", static_cast<long long>(p));
            rec.patient_id = pid;
            char img_name[64];
            std::snprintf(img_name, sizeof(img_name), "images/p%04lld_e%lld.png",
                          static_cast<long long>(p), static_cast<long long>(e));
            rec.image_path = img_name;
            rec.sdrg_grade = grade;
            rec.icdr_grade = grade;
            for (size_t i = 0; i < vocab.size(); ++i) rec.disease_labels[vocab[i]] = labels[i];
            rec.age = std::round(40.0 + 5.0 * grade + 2.0 * gauss(rng));
            rec.diabetes_duration = std::max(0.0, std::round(2.0 + 3.0 * grade + gauss(rng)));
            rec.sex = unit(rng) < 0.5 ? Sex::male : Sex::female;
            rec.exam_eye = e % 2 == 0 ? Eye::left : Eye::right;
            rec.insulin_use = grade >= 2;
            rec.diabetes_diagnosis = grade >= 1;
            // sparse missingness exercises the imputation path
            if (unit(rng) < 0.05) rec.age.reset();
            if (unit(rng) < 0.05) rec.diabetes_duration.reset();
            if (unit(rng) < 0.05) rec.sex.reset();

            s.image01 = render_image(opts.image_side, grade, labels, rng);
            out.push_back(std::move(s));
        }
    }
    return out;
}

SynthResult generate_synthetic_dataset(const std::string& out_dir, const SynthOptions& opts) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir);

    auto samples = generate_synth_samples(opts);
    Manifest manifest;
    manifest.label_vocabulary = synth_label_vocabulary();
    for (const auto& s : samples) {
        manifest.records.push_back(s.record);
        auto img8 = (s.image01.permute({1, 2, 0}) * 255.0).round().clamp(0, 255).to(torch::kUInt8).contiguous();
        cv::Mat rgb(static_cast<int>(opts.image_side), static_cast<int>(opts.image_side), CV_8UC3,
                    img8.data_ptr<uint8_t>());
        cv::Mat bgr;
        cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
        if (!cv::imwrite((fs::path(out_dir) / s.record.image_path).string(), bgr))
            throw IoError("failed to write image " + s.record.image_path);
    }

    SynthResult res;
    res.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    write_manifest(res.manifest_path, manifest);

    res.templates_path = (fs::path(out_dir) / "templates.csv").string();
    {
        std::ofstream out(res.templates_path);
        out << "label,sentence\n";
        for (const auto& [label, sentence] : synth_templates())
            out << label << ",\"" << sentence << "\"\n";
        if (!out) throw IoError("failed to write templates");
    }

    res.vocab_path = (fs::path(out_dir) / "vocab.txt").string();
    {
        std::ofstream out(res.vocab_path);
        for (const auto& t : synth_vocab_tokens()) out << t << "\n";
        if (!out) throw IoError("failed to write vocabulary");
    }
    return res;
}

} // namespace retfuse
