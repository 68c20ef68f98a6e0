#include "retfuse/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "retfuse/errors.hpp"

namespace retfuse {

namespace {

bool is_punct(char c) {
    return std::string(".,;:!?()").find(c) != std::string::npos;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    };
    for (char raw : text) {
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (is_punct(c)) {
            flush();
            words.push_back(std::string(1, c));
        } else {
            cur += c;
        }
    }
    flush();
    return words;
}

} // namespace

Tokenizer Tokenizer::from_file(const std::string& vocab_path) {
    std::ifstream in(vocab_path);
    if (!in) throw MissingFile("cannot open vocabulary: " + vocab_path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) tokens.push_back(line);
    }
    return from_tokens(tokens);
}

Tokenizer Tokenizer::from_tokens(const std::vector<std::string>& tokens) {
    Tokenizer t;
    t.tokens_ = tokens;
    for (size_t i = 0; i < tokens.size(); ++i) t.index_[tokens[i]] = static_cast<int64_t>(i);
    auto need = [&](const char* name) {
        auto it = t.index_.find(name);
        if (it == t.index_.end()) throw SchemaError(std::string("vocabulary lacks special token ") + name);
        return it->second;
    };
    t.pad_id_ = need("[PAD]");
    t.unk_id_ = need("[UNK]");
    t.cls_id_ = need("[CLS]");
    t.sep_id_ = need("[SEP]");
    return t;
}

std::vector<int64_t> Tokenizer::encode_word(const std::string& word) const {
    std::vector<int64_t> ids;
    size_t pos = 0;
    while (pos < word.size()) {
        size_t len = word.size() - pos;
        int64_t found = -1;
        size_t found_len = 0;
        while (len > 0) {
            std::string piece = (pos == 0 ? "" : "##") + word.substr(pos, len);
            auto it = index_.find(piece);
            if (it != index_.end()) {
                found = it->second;
                found_len = len;
                break;
            }
            --len;
        }
        if (found < 0) return {unk_id_};
        ids.push_back(found);
        pos += found_len;
    }
    return ids;
}

Tokenizer::Encoded Tokenizer::encode(const std::string& text, int64_t max_tokens) const {
    if (max_tokens < 2) throw ConfigError("max_tokens must be at least 2");
    std::vector<int64_t> ids{cls_id_};
    for (const auto& w : split_words(text)) {
        auto piece_ids = encode_word(w);
        ids.insert(ids.end(), piece_ids.begin(), piece_ids.end());
    }
    // truncate to max_tokens keeping room for the end marker
    if (static_cast<int64_t>(ids.size()) > max_tokens - 1) ids.resize(max_tokens - 1);
    ids.push_back(sep_id_);

    Encoded enc;
    enc.ids = ids;
    enc.mask.assign(ids.size(), 1);
    enc.ids.resize(max_tokens, pad_id_);
    enc.mask.resize(max_tokens, 0);
    return enc;
}

std::vector<std::string> Tokenizer::decode(const std::vector<int64_t>& ids) const {
    std::vector<std::string> out;
    for (int64_t id : ids) {
        if (id < 0 || id >= vocab_size()) throw Error("token id out of range: " + std::to_string(id));
        out.push_back(tokens_[id]);
    }
    return out;
}

std::vector<std::string> Tokenizer::build_vocab(const std::vector<std::string>& sentences) {
    std::set<std::string> words;
    std::set<std::string> chars;
    for (const auto& s : sentences) {
        for (const auto& w : split_words(s)) {
            words.insert(w);
            for (size_t i = 0; i < w.size(); ++i)
                chars.insert((i == 0 ? "" : "##") + w.substr(i, 1));
        }
    }
    std::vector<std::string> vocab{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    vocab.insert(vocab.end(), words.begin(), words.end());
    for (const auto& c : chars)
        if (!std::count(vocab.begin(), vocab.end(), c)) vocab.push_back(c);
    return vocab;
}

} // namespace retfuse
