#include "helpers.hpp"

#include <map>
#include <set>

#include "helpers.hpp"
#include "retfuse/dataset.hpp"
#include "retfuse/image_ops.hpp"
#include "retfuse/split.hpp"
#include "retfuse/synth.hpp"

using namespace retfuse;
using retfuse::testing::TempDir;
using retfuse::testing::read_file;

TEST_CASE("same seed produces byte-identical manifests") {
    TempDir a("synth_a"), b("synth_b");
    SynthOptions opts;
    opts.n_patients = 12;
    opts.seed = 99;
    auto ra = generate_synthetic_dataset(a.str(), opts);
    auto rb = generate_synthetic_dataset(b.str(), opts);
    CHECK(read_file(ra.manifest_path) == read_file(rb.manifest_path));
    CHECK(read_file(ra.templates_path) == read_file(rb.templates_path));
    CHECK(read_file(ra.vocab_path) == read_file(rb.vocab_path));
    CHECK(read_file(ra.manifest_path).size() > 0);
}

TEST_CASE("different seeds differ") {
    TempDir a("synth_s1"), b("synth_s2");
    SynthOptions o1, o2;
    o1.seed = 1;
    o2.seed = 2;
    auto ra = generate_synthetic_dataset(a.str(), o1);
    auto rb = generate_synthetic_dataset(b.str(), o2);
    CHECK(read_file(ra.manifest_path) != read_file(rb.manifest_path));
}

TEST_CASE("generated images decode back to their record") {
    SynthOptions opts;
    opts.n_patients = 40;
    opts.seed = 4;
    auto samples = generate_synth_samples(opts);
    REQUIRE(samples.size() == 40);
    const auto& vocab = synth_label_vocabulary();
    for (const auto& s : samples) {
        CHECK(decode_grade(s.image01) == s.record.sdrg_grade);
        auto labels = decode_labels(s.image01);
        for (size_t i = 0; i < vocab.size(); ++i)
            CHECK(labels[i] == s.record.disease_labels.at(vocab[i]));
    }
}

TEST_CASE("written PNGs survive the decode path") {
    TempDir dir("synth_png");
    SynthOptions opts;
    opts.n_patients = 6;
    opts.seed = 11;
    auto res = generate_synthetic_dataset(dir.str(), opts);
    auto manifest = load_manifest(res.manifest_path);
    REQUIRE(manifest.records.size() == 6);
    for (const auto& rec : manifest.records) {
        auto img = decode_image((dir.path / rec.image_path).string());
        CHECK(decode_grade(img) == rec.sdrg_grade);
    }
}

TEST_CASE("structured fields track the grade") {
    SynthOptions opts;
    opts.n_patients = 200;
    opts.seed = 3;
    auto samples = generate_synth_samples(opts);
    std::map<int, std::vector<double>> ages_by_grade;
    for (const auto& s : samples)
        if (s.record.age) ages_by_grade[s.record.sdrg_grade].push_back(*s.record.age);
    // mean age should rise by roughly 5 years per grade step
    REQUIRE(ages_by_grade.count(0));
    REQUIRE(ages_by_grade.count(4));
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    CHECK(mean(ages_by_grade[4]) - mean(ages_by_grade[0]) > 10.0);
}

TEST_CASE("the default dataset admits a patient-level 80/10/10 split") {
    SynthOptions opts;
    auto samples = generate_synth_samples(opts);
    Manifest manifest;
    manifest.label_vocabulary = synth_label_vocabulary();
    for (const auto& s : samples) manifest.records.push_back(s.record);
    auto split = patient_split(manifest.records, {0.8, 0.1, 0.1}, 42);
    CHECK(records_in_split(manifest.records, split, Split::train).size() >= 24);
    CHECK(!records_in_split(manifest.records, split, Split::val).empty());
    CHECK(!records_in_split(manifest.records, split, Split::test).empty());
}

TEST_CASE("notes for synth records use the template sentences") {
    SynthOptions opts;
    opts.n_patients = 30;
    opts.seed = 8;
    auto samples = generate_synth_samples(opts);
    auto templates = synth_templates();
    bool saw_positive = false, saw_negative = false;
    for (const auto& s : samples) {
        auto note = generate_clinical_note(s.record.disease_labels, templates, synth_label_vocabulary());
        bool any = false;
        for (const auto& [label, present] : s.record.disease_labels) any = any || present;
        if (any) {
            saw_positive = true;
            CHECK(note.find("present") != std::string::npos);
        } else {
            saw_negative = true;
            CHECK(note == kNoFindingsSentence);
        }
    }
    CHECK(saw_positive);
    CHECK(saw_negative);
}
