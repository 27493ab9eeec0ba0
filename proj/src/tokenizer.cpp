#include "tablekv/tokenizer.hpp"

#include "tablekv/errors.hpp"

namespace tablekv {

namespace {

bool is_word_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_';
}

// Calls fn(start, end) for each maximal word run and fn(i, i+1) for every
// other byte, in order.
template <typename Fn>
void split(const std::string& text, Fn fn) {
    size_t i = 0;
    while (i < text.size()) {
        if (is_word_char(static_cast<unsigned char>(text[i]))) {
            size_t j = i + 1;
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            fn(i, j);
            i = j;
        } else {
            fn(i, i + 1);
            ++i;
        }
    }
}

} // namespace

void Tokenizer::add_corpus_text(const std::string& text) {
    split(text, [&](size_t a, size_t b) {
        if (b - a < 2 && !is_word_char(static_cast<unsigned char>(text[a]))) return;
        std::string w = text.substr(a, b - a);
        if (word_ids_.count(w)) return;
        word_ids_.emplace(w, kByteVocab + static_cast<TokenId>(words_.size()));
        words_.push_back(std::move(w));
    });
}

std::vector<TokenId> Tokenizer::encode(const std::string& text) const {
    std::vector<TokenId> out;
    split(text, [&](size_t a, size_t b) {
        if (is_word_char(static_cast<unsigned char>(text[a]))) {
            auto it = word_ids_.find(text.substr(a, b - a));
            if (it != word_ids_.end()) {
                out.push_back(it->second);
                return;
            }
        }
        for (size_t i = a; i < b; ++i)
            out.push_back(static_cast<TokenId>(static_cast<unsigned char>(text[i])));
    });
    return out;
}

std::string Tokenizer::decode(std::span<const TokenId> tokens) const {
    std::string out;
    for (TokenId t : tokens) {
        if (t >= 0 && t < kByteVocab) {
            out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
        } else if (t >= kByteVocab && t < vocab_size()) {
            out += words_[static_cast<size_t>(t) - kByteVocab];
        } else {
            throw Error(Errc::bad_config, "token id " + std::to_string(t) + " outside vocabulary");
        }
    }
    return out;
}

uint64_t Tokenizer::vocab_hash() const {
    uint64_t h = 1469598103934665603ull; // FNV-1a 64
    auto mix_byte = [&](unsigned char b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    for (const auto& w : words_) {
        for (char c : w) mix_byte(static_cast<unsigned char>(c));
        mix_byte(0xFF);
    }
    return h;
}

} // namespace tablekv
