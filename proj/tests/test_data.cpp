#include "helpers.hpp"

#include <random>
#include <set>

#include "helpers.hpp"
#include "retfuse/errors.hpp"
#include "retfuse/image_ops.hpp"
#include "retfuse/manifest.hpp"
#include "retfuse/notes.hpp"
#include "retfuse/split.hpp"
#include "retfuse/structured.hpp"

using namespace retfuse;
using retfuse::testing::TempDir;
using retfuse::testing::write_file;

namespace {

const char* kHeader =
    "patient_id,image_path,age,sex,exam_eye,diabetes_duration,insulin_use,diabetes_diagnosis,"
    "sdrg_grade,icdr_grade,label:diabetic_retinopathy,label:macular_edema";

std::string manifest_text(const std::vector<std::string>& rows) {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& r : rows) out += r + "\n";
    return out;
}

} // namespace

TEST_CASE("load_manifest parses well-formed rows") {
    TempDir dir("manifest");
    auto path = dir.str() + "/m.csv";
    write_file(path, manifest_text({
                         "p1,images/a.png,52,male,left,4,1,1,2,2,1,0",
                         "p1,images/b.png,52,male,right,4,1,1,2,3,1,1",
                         "p2,images/c.png,,female,left,,0,0,0,0,0,0",
                     }));
    auto m = load_manifest(path);
    REQUIRE(m.records.size() == 3);
    CHECK((m.label_vocabulary == std::vector<std::string>{"diabetic_retinopathy", "macular_edema"}));
    CHECK(m.records[0].age == 52.0);
    CHECK(m.records[0].sex == Sex::male);
    CHECK(m.records[1].exam_eye == Eye::right);
    CHECK(m.records[1].disease_labels.at("macular_edema"));
    // empty nullable cells become null
    CHECK_FALSE(m.records[2].age.has_value());
    CHECK_FALSE(m.records[2].diabetes_duration.has_value());
}

TEST_CASE("load_manifest rejects invalid grades and required fields") {
    TempDir dir("manifest_bad");
    auto path = dir.str() + "/m.csv";
    write_file(path, manifest_text({"p1,a.png,52,male,left,4,1,1,7,2,1,0"}));
    CHECK_THROWS_AS(load_manifest(path), SchemaError);

    write_file(path, manifest_text({",a.png,52,male,left,4,1,1,2,2,1,0"}));
    CHECK_THROWS_AS(load_manifest(path), SchemaError);

    write_file(path, manifest_text({"p1,a.png,52,male,left,4,1,1,,2,1,0"}));
    CHECK_THROWS_AS(load_manifest(path), SchemaError);

    CHECK_THROWS_AS(load_manifest(dir.str() + "/missing.csv"), MissingFile);
}

TEST_CASE("load_manifest reports the offending row and column") {
    TempDir dir("manifest_msg");
    auto path = dir.str() + "/m.csv";
    write_file(path, manifest_text({
                         "p1,a.png,52,male,left,4,1,1,2,2,1,0",
                         "p2,b.png,52,male,left,4,1,1,2,9,1,0",
                     }));
    try {
        load_manifest(path);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("icdr_grade") != std::string::npos);
    }
}

TEST_CASE("manifest round-trips through write_manifest") {
    TempDir dir("manifest_rt");
    auto path = dir.str() + "/m.csv";
    write_file(path, manifest_text({
                         "p1,images/a.png,52,male,left,4,1,1,2,2,1,0",
                         "p2,images/c.png,,female,left,,0,0,0,0,0,0",
                     }));
    auto m = load_manifest(path);
    auto path2 = dir.str() + "/m2.csv";
    write_manifest(path2, m);
    auto m2 = load_manifest(path2);
    REQUIRE(m2.records.size() == m.records.size());
    CHECK(m2.records[0].age == m.records[0].age);
    CHECK(m2.records[1].age == m.records[1].age);
    CHECK(m2.label_vocabulary == m.label_vocabulary);
}

TEST_CASE("generate_clinical_note concatenates positive labels in declared order") {
    TemplateTable t{{"diabetic_retinopathy", "Diabetic retinopathy is present."},
                    {"macular_edema", "Macular edema is present."}};
    std::vector<std::string> order{"diabetic_retinopathy", "macular_edema"};

    CHECK(generate_clinical_note({{"diabetic_retinopathy", true}, {"macular_edema", true}}, t, order) ==
          "Diabetic retinopathy is present. Macular edema is present.");
    CHECK(generate_clinical_note({{"diabetic_retinopathy", true}, {"macular_edema", false}}, t, order) ==
          "Diabetic retinopathy is present.");
    CHECK(generate_clinical_note({{"diabetic_retinopathy", false}, {"macular_edema", false}}, t, order) ==
          "No abnormal findings are present.");
    CHECK_THROWS_AS(generate_clinical_note({{"unknown_thing", true}}, t, {"unknown_thing"}), UnknownLabel);
}

TEST_CASE("note generation is a pure function of labels, templates and order") {
    TemplateTable t{{"a", "A."}, {"b", "B."}};
    std::map<std::string, bool> labels{{"a", true}, {"b", true}};
    auto first = generate_clinical_note(labels, t, {"b", "a"});
    CHECK(first == "B. A.");
    for (int i = 0; i < 5; ++i) CHECK(generate_clinical_note(labels, t, {"b", "a"}) == first);
}

namespace {

SampleRecord rec_with(std::optional<double> age, std::optional<double> duration) {
    SampleRecord r;
    r.patient_id = "p";
    r.image_path = "x.png";
    r.age = age;
    r.diabetes_duration = duration;
    return r;
}

} // namespace

TEST_CASE("fit_structured_stats computes population statistics") {
    // ages {40, 60}: mean 50, population std = sqrt(((40-50)^2+(60-50)^2)/2) = 10
    std::vector<SampleRecord> recs{rec_with(40, 5), rec_with(60, 5)};
    auto s = fit_structured_stats(recs);
    CHECK(s.age.mean == doctest::Approx(50.0));
    CHECK(s.age.std == doctest::Approx(10.0));
    CHECK(s.age.median == doctest::Approx(50.0));
    // constant duration: degenerate, std substituted with 1
    CHECK(s.diabetes_duration.degenerate);
    CHECK(s.diabetes_duration.std == 1.0);
    CHECK_FALSE(s.warnings.empty());
}

TEST_CASE("fit_structured_stats mode and empty split") {
    std::vector<SampleRecord> recs{rec_with(40, 1), rec_with(50, 2)};
    recs[0].insulin_use = true;
    recs[1].insulin_use = true;
    auto s = fit_structured_stats(recs);
    CHECK(s.insulin_use_mode == true);
    CHECK_THROWS_AS(fit_structured_stats({}), EmptySplit);
}

TEST_CASE("preprocess_structured matches a hand-computed pipeline on a toy set") {
    // 4-record toy training set, worked by hand:
    // ages {30, 40, 50, 60}: mean 45, pop std = sqrt((225+25+25+225)/4) = sqrt(125)
    // durations {2, 4, 6, 8}: mean 5, pop std = sqrt((9+1+1+9)/4) = sqrt(5)
    std::vector<SampleRecord> train;
    double ages[] = {30, 40, 50, 60}, durs[] = {2, 4, 6, 8};
    for (int i = 0; i < 4; ++i) {
        auto r = rec_with(ages[i], durs[i]);
        r.sex = i < 3 ? Sex::female : Sex::male; // mode female
        r.exam_eye = Eye::right;                 // mode right
        r.insulin_use = i % 2 == 0;              // tie -> false (lowest)
        r.diabetes_diagnosis = true;
        train.push_back(r);
    }
    auto s = fit_structured_stats(train);
    CHECK(s.age.std == doctest::Approx(std::sqrt(125.0)));
    CHECK(s.diabetes_duration.std == doctest::Approx(std::sqrt(5.0)));

    SampleRecord q = rec_with(50, std::nullopt); // duration null -> median 5 -> standardized 0
    q.sex = std::nullopt;                        // -> mode female -> 1
    q.exam_eye = Eye::left;
    q.insulin_use = true;
    q.diabetes_diagnosis = std::nullopt;         // -> mode true -> 1
    auto v = preprocess_structured(q, s);
    CHECK(v[0] == doctest::Approx((50.0 - 45.0) / std::sqrt(125.0)));
    CHECK(v[1] == 1.0f);
    CHECK(v[2] == 0.0f);
    CHECK(v[3] == doctest::Approx(0.0));
    CHECK(v[4] == 1.0f);
    CHECK(v[5] == 1.0f);

    // age equal to the training mean standardizes to exactly 0
    auto v2 = preprocess_structured(rec_with(45, 5), s);
    CHECK(v2[0] == doctest::Approx(0.0));
}

TEST_CASE("standardized training fields have zero mean and unit variance") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> age_d(55, 12), dur_d(6, 3);
    std::vector<SampleRecord> train;
    for (int i = 0; i < 64; ++i) train.push_back(rec_with(age_d(rng), dur_d(rng)));
    auto s = fit_structured_stats(train);
    double sum = 0, sq = 0;
    for (const auto& r : train) {
        double v = preprocess_structured(r, s)[0];
        sum += v;
        sq += v * v;
    }
    double mean = sum / 64, var = sq / 64 - mean * mean;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-5);
}

TEST_CASE("patient_split honors ratios, determinism and the leakage invariant") {
    std::vector<SampleRecord> recs;
    for (int p = 0; p < 10; ++p) {
        for (int e = 0; e < (p == 3 ? 3 : 1); ++e) {
            auto r = rec_with(50, 5);
            r.patient_id = "p" + std::to_string(p);
            recs.push_back(r);
        }
    }
    auto a = patient_split(recs, {0.8, 0.1, 0.1}, 11);
    std::array<int, 3> counts{};
    for (const auto& [pid, s] : a.by_patient) counts[static_cast<int>(s)]++;
    CHECK((counts == std::array<int, 3>{8, 1, 1}));

    auto b = patient_split(recs, {0.8, 0.1, 0.1}, 11);
    CHECK((a.by_patient == b.by_patient));

    // all records of p3 land in one split
    auto s3 = a.of("p3");
    for (const auto& r : records_in_split(recs, a, s3))
        if (r.patient_id == "p3") CHECK(a.of(r.patient_id) == s3);
    CHECK(records_in_split(recs, a, s3).size() >= 3);

    CHECK_THROWS_AS(patient_split(recs, {0.8, 0.1, 0.2}, 1), InvalidRatios);
    CHECK_THROWS_AS(patient_split(recs, {1.0, 0.0, 0.0}, 1), InvalidRatios);
}

TEST_CASE("augment_with_draws identity composition returns the input") {
    auto img = torch::rand({3, 8, 8});
    AugmentDraws identity; // no flips, 0 degrees, unit factors
    auto out = augment_with_draws(img, identity);
    CHECK(torch::allclose(out, img));
}

TEST_CASE("double horizontal flip is the identity on pixels") {
    auto img = torch::rand({3, 8, 8});
    AugmentDraws flip;
    flip.flip_h = true;
    auto twice = augment_with_draws(augment_with_draws(img, flip), flip);
    CHECK(torch::allclose(twice, img));
}

TEST_CASE("brightness jitter matches a scalar-multiply oracle") {
    auto img = torch::full({3, 2, 2}, 0.5f);
    AugmentDraws d;
    d.brightness = 1.1;
    auto out = augment_with_draws(img, d);
    // constant image: contrast is a no-op around the mean, so out = 0.55
    CHECK(torch::allclose(out, torch::full({3, 2, 2}, 0.55f), 1e-6, 1e-6));

    // clamping: bright pixel saturates at 1
    auto hot = torch::full({3, 2, 2}, 0.95f);
    auto clamped = augment_with_draws(hot, d);
    CHECK(clamped.max().item<float>() <= 1.0f);
}

TEST_CASE("augmentation output always stays in [0,1]") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        auto img = torch::rand({3, 16, 16});
        auto out = augment_image(img, rng);
        CHECK(out.min().item<float>() >= 0.0f);
        CHECK(out.max().item<float>() <= 1.0f);
    }
}

TEST_CASE("bilinear resize identity and constant-image arithmetic") {
    auto img = torch::rand({3, 16, 16});
    CHECK(torch::allclose(bilinear_resize(img, 16, 16), img));

    auto zeros = torch::zeros({3, 8, 8});
    auto std0 = standardize_imagenet(zeros);
    for (int c = 0; c < 3; ++c) {
        float expected = (0.0f - kImagenetMean[c]) / kImagenetStd[c];
        CHECK(std0[c][0][0].item<float>() == doctest::Approx(expected));
    }
}

TEST_CASE("bilinear resize matches an independent resampler on a 4x4 pattern") {
    // independent oracle: explicit half-pixel-center bilinear, separate code path
    auto src = torch::zeros({1, 4, 4});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) src[0][y][x] = static_cast<float>((x + y) % 2); // checkerboard
    auto out = bilinear_resize(src, 2, 2);

    auto oracle = [&](int oy, int ox) {
        double fy = (oy + 0.5) * 2.0 - 0.5, fx = (ox + 0.5) * 2.0 - 0.5;
        int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
        double wy = fy - y0, wx = fx - x0;
        auto at = [&](int y, int x) {
            y = std::clamp(y, 0, 3);
            x = std::clamp(x, 0, 3);
            return static_cast<double>((x + y) % 2);
        };
        return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
               wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
    };
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            CHECK(out[0][y][x].item<float>() == doctest::Approx(oracle(y, x)));
}

TEST_CASE("split leakage: disjoint patients across splits for random seeds") {
    std::vector<SampleRecord> recs;
    for (int p = 0; p < 23; ++p)
        for (int e = 0; e < 2; ++e) {
            auto r = rec_with(50, 5);
            r.patient_id = "pat" + std::to_string(p);
            recs.push_back(r);
        }
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto a = patient_split(recs, {0.8, 0.1, 0.1}, seed);
        std::array<std::set<std::string>, 3> sets;
        for (const auto& [pid, s] : a.by_patient) sets[static_cast<int>(s)].insert(pid);
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                for (const auto& pid : sets[i]) CHECK(sets[j].count(pid) == 0);
    }
}
