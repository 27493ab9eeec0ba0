#pragma once

#include <set>
#include <vector>

#include "tablekv/attention.hpp"
#include "tablekv/rng.hpp"
#include "tablekv/schema.hpp"
#include "tablekv/types.hpp"

// Random token-level corpora for attention tests: tables with distinct token
// sequences, partitioned into consecutive-id encoding groups.
namespace testsupport {

struct TokenCorpus {
    int vocab = 0;
    std::vector<std::vector<tablekv::TokenId>> table_tokens;
    tablekv::EncodingPlan plan;
};

inline TokenCorpus random_token_corpus(uint64_t seed, int n_tables, int max_group_size,
                                       int min_tokens, int max_tokens, int vocab) {
    tablekv::SeededRng rng(seed);
    TokenCorpus c;
    c.vocab = vocab;
    std::set<std::vector<tablekv::TokenId>> used;
    for (int t = 0; t < n_tables; ++t) {
        std::vector<tablekv::TokenId> seq;
        do {
            const int len = min_tokens + static_cast<int>(rng.next_below(
                                             static_cast<uint64_t>(max_tokens - min_tokens + 1)));
            seq.assign(len, 0);
            for (auto& tok : seq)
                tok = static_cast<tablekv::TokenId>(rng.next_below(static_cast<uint64_t>(vocab)));
        } while (!used.insert(seq).second);
        c.table_tokens.push_back(std::move(seq));
    }

    c.plan.group_of.assign(n_tables, -1);
    int next = 0;
    while (next < n_tables) {
        const int size = 1 + static_cast<int>(rng.next_below(
                                 static_cast<uint64_t>(max_group_size)));
        tablekv::EncodingPlan::Group g;
        for (int i = 0; i < size && next < n_tables; ++i, ++next) {
            c.plan.group_of[next] = static_cast<int>(c.plan.groups.size());
            g.tables.push_back(next);
        }
        c.plan.groups.push_back(std::move(g));
    }
    std::vector<int> counts;
    for (const auto& seq : c.table_tokens) counts.push_back(static_cast<int>(seq.size()));
    c.plan.assign_offsets(counts);
    return c;
}

// Encodes every group of the corpus with the given model.
template <typename Real>
std::vector<tablekv::TableKV<Real>> encode_corpus(const tablekv::ModelConfig& cfg,
                                                  const tablekv::ModelWeights<Real>& w,
                                                  const TokenCorpus& c) {
    std::vector<tablekv::TableKV<Real>> out(c.table_tokens.size());
    for (const auto& g : c.plan.groups) {
        std::vector<tablekv::GroupTableRef<Real>> refs;
        for (int id : g.tables)
            refs.push_back({id, std::span<const tablekv::TokenId>(c.table_tokens[id])});
        auto kvs = tablekv::encode_group<Real>(cfg, w, refs);
        for (auto& kv : kvs) out[static_cast<size_t>(kv.table_id)] = std::move(kv);
    }
    return out;
}

// Concatenated tokens plus the matching block mask for an assembly order.
inline std::vector<tablekv::TokenId> concat_tokens(const TokenCorpus& c,
                                                   const std::vector<int>& order) {
    std::vector<tablekv::TokenId> out;
    for (int id : order)
        out.insert(out.end(), c.table_tokens[id].begin(), c.table_tokens[id].end());
    return out;
}

inline tablekv::BlockMask mask_for_order(const TokenCorpus& c, const std::vector<int>& order) {
    tablekv::BlockMask mask;
    for (int id : order)
        mask.append_block(c.plan.group_of[id], static_cast<int>(c.table_tokens[id].size()));
    return mask;
}

// Group-contiguous random assembly order: groups shuffled, tables within a
// group kept in plan order.
inline std::vector<int> shuffled_group_order(const TokenCorpus& c, uint64_t seed) {
    tablekv::SeededRng rng(seed);
    std::vector<size_t> gidx(c.plan.groups.size());
    for (size_t i = 0; i < gidx.size(); ++i) gidx[i] = i;
    for (size_t i = gidx.size(); i > 1; --i)
        std::swap(gidx[i - 1], gidx[rng.next_below(i)]);
    std::vector<int> order;
    for (size_t gi : gidx)
        for (int id : c.plan.groups[gi].tables) order.push_back(id);
    return order;
}

} // namespace testsupport
