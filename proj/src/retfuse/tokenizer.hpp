#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace retfuse {

/// Greedy longest-match subword tokenizer over a line-per-token vocabulary
/// file. Continuation pieces use the "##" prefix; words with no covering
/// pieces map to [UNK]. Special ids: [PAD], [UNK], [CLS], [SEP].
class Tokenizer {
public:
    static Tokenizer from_file(const std::string& vocab_path);
    static Tokenizer from_tokens(const std::vector<std::string>& tokens);

    struct Encoded {
        std::vector<int64_t> ids;  // fixed length = max_tokens, padded
        std::vector<int64_t> mask; // 1 where ids is a real token (incl. CLS/SEP)
    };

    /// Lowercases, splits words and punctuation, wraps in [CLS]...[SEP],
    /// truncates to max_tokens keeping the end marker, pads with [PAD].
    Encoded encode(const std::string& text, int64_t max_tokens) const;

    std::vector<std::string> decode(const std::vector<int64_t>& ids) const;

    int64_t vocab_size() const { return static_cast<int64_t>(tokens_.size()); }
    int64_t pad_id() const { return pad_id_; }
    int64_t unk_id() const { return unk_id_; }
    int64_t cls_id() const { return cls_id_; }
    int64_t sep_id() const { return sep_id_; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    /// A small vocabulary covering the given sentences: specials, the
    /// distinct lowercase words, punctuation, and single-character pieces
    /// so every word tokenizes without [UNK].
    static std::vector<std::string> build_vocab(const std::vector<std::string>& sentences);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int64_t> index_;
    int64_t pad_id_ = 0, unk_id_ = 1, cls_id_ = 2, sep_id_ = 3;

    std::vector<int64_t> encode_word(const std::string& word) const;
};

} // namespace retfuse
