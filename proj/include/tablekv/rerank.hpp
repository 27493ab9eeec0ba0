#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/types.hpp"

namespace tablekv {

// Packed table-incidence bitvector; bit k set iff table k is used by the
// query. Bits at or above n_bits stay zero.
struct IncidenceVector {
    int n_bits = 0;
    std::vector<uint64_t> words;

    bool get(int bit) const { return (words[bit >> 6] >> (bit & 63)) & 1u; }
    int popcount() const;
};

IncidenceVector incidence(const std::vector<int>& table_ids, int n_bits);

uint64_t hamming(const IncidenceVector& a, const IncidenceVector& b);

struct QueryRecord {
    std::string query_id;
    std::vector<TokenId> tokens;
    std::vector<int> tables; // matched table ids, deduplicated, in serving order
    IncidenceVector inc;
    int query_token_count = 0; // tokens outside the matched table spans
};

QueryRecord make_query_record(std::string query_id, std::vector<TokenId> tokens,
                              std::vector<int> matched_tables, int table_count,
                              int query_token_count = -1);

enum class AnchorMode { seeded, fixed_first };

// Greedy nearest-neighbor chain over XOR-Hamming distance. Queries with an
// empty table set are appended after the chain in their original order; the
// anchor is drawn among the rest. Returns a permutation of [0, N).
std::vector<size_t> rerank(const std::vector<QueryRecord>& queries, uint64_t seed,
                           AnchorMode mode = AnchorMode::seeded);

} // namespace tablekv
