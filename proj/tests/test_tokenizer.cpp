#include "helpers.hpp"

#include <algorithm>

#include "retfuse/synth.hpp"
#include "retfuse/tokenizer.hpp"

using namespace retfuse;

TEST_CASE("empty string encodes to begin/end plus padding") {
    auto tok = Tokenizer::from_tokens(synth_vocab_tokens());
    auto enc = tok.encode("", 16);
    REQUIRE(enc.ids.size() == 16);
    CHECK(enc.ids[0] == tok.cls_id());
    CHECK(enc.ids[1] == tok.sep_id());
    for (size_t i = 2; i < enc.ids.size(); ++i) CHECK(enc.ids[i] == tok.pad_id());
    CHECK(enc.mask[0] == 1);
    CHECK(enc.mask[1] == 1);
    CHECK(enc.mask[2] == 0);
}

TEST_CASE("long notes truncate to max_tokens with the end marker preserved") {
    auto tok = Tokenizer::from_tokens(synth_vocab_tokens());
    std::string note;
    for (int i = 0; i < 300; ++i) note += "drusen ";
    auto enc = tok.encode(note, 128);
    REQUIRE(enc.ids.size() == 128);
    CHECK(enc.ids[127] == tok.sep_id());
    CHECK(std::count(enc.mask.begin(), enc.mask.end(), 1) == 128);
}

TEST_CASE("encoding a fixed sentence is stable and matches the vocabulary") {
    auto tok = Tokenizer::from_tokens(synth_vocab_tokens());
    auto enc1 = tok.encode("Diabetic retinopathy is present.", 24);
    auto enc2 = Tokenizer::from_tokens(synth_vocab_tokens()).encode("Diabetic retinopathy is present.", 24);
    CHECK(enc1.ids == enc2.ids);

    // independent reconstruction from the vocabulary word list
    auto& words = tok.tokens();
    auto idx = [&](const std::string& w) {
        return static_cast<int64_t>(std::find(words.begin(), words.end(), w) - words.begin());
    };
    std::vector<int64_t> expected{tok.cls_id(), idx("diabetic"), idx("retinopathy"), idx("is"),
                                  idx("present"), idx("."), tok.sep_id()};
    expected.resize(24, tok.pad_id());
    CHECK(enc1.ids == expected);
}

TEST_CASE("unknown words fall back to subword pieces or UNK") {
    auto tok = Tokenizer::from_tokens({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "ab", "##c"});
    auto enc = tok.encode("abc", 8);
    CHECK(enc.ids[1] == 4); // "ab"
    CHECK(enc.ids[2] == 5); // "##c"

    auto enc2 = tok.encode("zzz", 8);
    CHECK(enc2.ids[1] == tok.unk_id());
}

TEST_CASE("build_vocab covers every word of its sentences without UNK") {
    auto vocab = Tokenizer::build_vocab({"Macular edema is present.", "Drusen are present."});
    auto tok = Tokenizer::from_tokens(vocab);
    auto enc = tok.encode("Macular edema is present. Drusen are present.", 32);
    for (int64_t id : enc.ids) CHECK(id != tok.unk_id());
}
