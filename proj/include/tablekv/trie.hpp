#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/types.hpp"

namespace tablekv {

struct MatchSpan {
    int table_id = -1;
    size_t start = 0;
    size_t end = 0; // exclusive; end - start == matched serialization length
};

struct TrieQueryResult {
    bool found = false;
    size_t next = 0; // start + matched length when found
    int table_id = -1;
    CacheHandle handle = 0;
};

struct MatchStats {
    size_t node_visits = 0; // successful child traversals, for the amortized-cost bound
};

// Token-keyed trie over table serializations. Terminals carry the table id
// and an opaque cache handle resolved by the KV store. Single-writer during
// construction, immutable afterwards.
class TableTrie {
public:
    TableTrie();
    TableTrie(TableTrie&&) noexcept = default;
    TableTrie& operator=(TableTrie&&) noexcept = default;

    void insert(std::span<const TokenId> tokens, int table_id, CacheHandle handle);

    // Longest terminal-reaching path starting exactly at `start`. Out-of-range
    // start is reported as no match.
    TrieQueryResult query(std::span<const TokenId> tokens, size_t start,
                          MatchStats* stats = nullptr) const;

    // Iterative extraction: on a match the cursor jumps past it, on a miss it
    // advances by one token. Spans are non-overlapping and ordered by start.
    std::vector<MatchSpan> match_all(std::span<const TokenId> tokens,
                                     MatchStats* stats = nullptr) const;

    size_t table_count() const { return table_count_; }

private:
    struct Node {
        std::unordered_map<TokenId, std::unique_ptr<Node>> children;
        int table_id = -1; // >= 0 marks a terminal
        CacheHandle handle = 0;
    };

    std::unique_ptr<Node> root_;
    size_t table_count_ = 0;
    std::unordered_map<int, char> inserted_ids_;
};

} // namespace tablekv
