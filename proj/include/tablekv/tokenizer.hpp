#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tablekv/types.hpp"

namespace tablekv {

// Word/byte tokenizer. Ids 0..255 are raw bytes; ids 256+ are corpus words
// (maximal [A-Za-z0-9_] runs) in first-appearance order. Any text round-trips
// losslessly: unknown words and all non-word characters fall back to bytes.
// A newline ends every word run, so text built by joining newline-terminated
// pieces tokenizes to the concatenation of the pieces' own token sequences.
class Tokenizer {
public:
    static constexpr int kByteVocab = 256;

    void add_corpus_text(const std::string& text);

    std::vector<TokenId> encode(const std::string& text) const;
    std::string decode(std::span<const TokenId> tokens) const;

    int vocab_size() const { return kByteVocab + static_cast<int>(words_.size()); }
    uint64_t vocab_hash() const;

private:
    std::unordered_map<std::string, TokenId> word_ids_;
    std::vector<std::string> words_;
};

} // namespace tablekv
