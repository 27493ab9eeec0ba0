#include "tablekv/trie.hpp"

namespace tablekv {

TableTrie::TableTrie() : root_(std::make_unique<Node>()) {}

void TableTrie::insert(std::span<const TokenId> tokens, int table_id, CacheHandle handle) {
    if (tokens.empty())
        throw Error(Errc::empty_serialization,
                    "table " + std::to_string(table_id) + " has an empty token serialization");
    if (inserted_ids_.count(table_id))
        throw Error(Errc::duplicate_table,
                    "table " + std::to_string(table_id) + " already inserted");

    Node* node = root_.get();
    for (TokenId t : tokens) {
        auto& child = node->children[t];
        if (!child) child = std::make_unique<Node>();
        node = child.get();
    }
    if (node->table_id >= 0)
        throw Error(Errc::duplicate_serialization,
                    "tables " + std::to_string(node->table_id) + " and " +
                        std::to_string(table_id) + " share an identical serialization");
    node->table_id = table_id;
    node->handle = handle;
    inserted_ids_[table_id] = 1;
    table_count_++;
}

TrieQueryResult TableTrie::query(std::span<const TokenId> tokens, size_t start,
                                 MatchStats* stats) const {
    TrieQueryResult result;
    if (start >= tokens.size()) return result;

    const Node* node = root_.get();
    size_t pos = start;
    while (pos < tokens.size()) {
        auto it = node->children.find(tokens[pos]);
        if (it == node->children.end()) break;
        node = it->second.get();
        ++pos;
        if (stats) stats->node_visits++;
        if (node->table_id >= 0) {
            result.found = true;
            result.next = pos;
            result.table_id = node->table_id;
            result.handle = node->handle;
        }
    }
    return result;
}

std::vector<MatchSpan> TableTrie::match_all(std::span<const TokenId> tokens,
                                            MatchStats* stats) const {
    std::vector<MatchSpan> spans;
    size_t p = 0;
    while (p < tokens.size()) {
        auto q = query(tokens, p, stats);
        if (q.found) {
            spans.push_back({q.table_id, p, q.next});
            p = q.next;
        } else {
            p += 1;
        }
    }
    return spans;
}

} // namespace tablekv
