#include "tablekv/rerank.hpp"

#include <algorithm>
#include <bit>

#include "tablekv/rng.hpp"

namespace tablekv {

int IncidenceVector::popcount() const {
    int total = 0;
    for (uint64_t w : words) total += std::popcount(w);
    return total;
}

IncidenceVector incidence(const std::vector<int>& table_ids, int n_bits) {
    IncidenceVector v;
    v.n_bits = n_bits;
    v.words.assign((static_cast<size_t>(n_bits) + 63) / 64, 0);
    for (int id : table_ids) {
        if (id < 0 || id >= n_bits)
            throw Error(Errc::table_id_out_of_range,
                        "table id " + std::to_string(id) + " not below " +
                            std::to_string(n_bits));
        v.words[id >> 6] |= uint64_t(1) << (id & 63);
    }
    return v;
}

uint64_t hamming(const IncidenceVector& a, const IncidenceVector& b) {
    if (a.n_bits != b.n_bits)
        throw Error(Errc::length_mismatch, "incidence vectors cover different table counts");
    uint64_t total = 0;
    for (size_t w = 0; w < a.words.size(); ++w)
        total += static_cast<uint64_t>(std::popcount(a.words[w] ^ b.words[w]));
    return total;
}

QueryRecord make_query_record(std::string query_id, std::vector<TokenId> tokens,
                              std::vector<int> matched_tables, int table_count,
                              int query_token_count) {
    std::sort(matched_tables.begin(), matched_tables.end());
    matched_tables.erase(std::unique(matched_tables.begin(), matched_tables.end()),
                         matched_tables.end());
    QueryRecord rec;
    rec.query_id = std::move(query_id);
    rec.tokens = std::move(tokens);
    rec.inc = incidence(matched_tables, table_count);
    rec.tables = std::move(matched_tables);
    rec.query_token_count =
        query_token_count >= 0 ? query_token_count : static_cast<int>(rec.tokens.size());
    return rec;
}

std::vector<size_t> rerank(const std::vector<QueryRecord>& queries, uint64_t seed,
                           AnchorMode mode) {
    if (queries.empty()) throw Error(Errc::empty_batch, "rerank needs at least one query");

    std::vector<size_t> active, empties;
    for (size_t i = 0; i < queries.size(); ++i)
        (queries[i].tables.empty() ? empties : active).push_back(i);

    std::vector<size_t> out;
    out.reserve(queries.size());

    if (!active.empty()) {
        size_t anchor_slot = 0;
        if (mode == AnchorMode::seeded) {
            SeededRng rng(seed);
            anchor_slot = rng.next_below(active.size());
        }
        std::vector<char> used(active.size(), 0);
        size_t cur = active[anchor_slot];
        used[anchor_slot] = 1;
        out.push_back(cur);
        for (size_t step = 1; step < active.size(); ++step) {
            uint64_t best = ~uint64_t(0);
            size_t best_slot = active.size();
            for (size_t s = 0; s < active.size(); ++s) {
                if (used[s]) continue;
                const uint64_t d = hamming(queries[cur].inc, queries[active[s]].inc);
                if (d < best) { // equal distance keeps the earlier (lower) index
                    best = d;
                    best_slot = s;
                }
            }
            used[best_slot] = 1;
            cur = active[best_slot];
            out.push_back(cur);
        }
    }
    out.insert(out.end(), empties.begin(), empties.end());
    return out;
}

} // namespace tablekv
