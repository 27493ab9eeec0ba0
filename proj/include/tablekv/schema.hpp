#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tablekv/errors.hpp"

namespace tablekv {

struct ColumnDef {
    std::string name;
    std::string description;
    bool is_primary_key = false;
};

struct ForeignKey {
    std::string column;      // local column name
    int ref_table = -1;      // referenced table_id
    std::string ref_column;  // referenced column name
};

struct TableSchema {
    int table_id = -1; // dense, unique per corpus
    std::string name;
    std::vector<ColumnDef> columns;
    std::vector<ForeignKey> foreign_keys;
};

// Directed dependency graph over tables: one edge referenced -> referencing
// per distinct foreign-key pair. Isolated tables are zero-degree nodes.
struct SchemaGraph {
    int node_count = 0;
    std::vector<std::vector<int>> out_edges; // out_edges[u] sorted ascending, deduplicated
    std::vector<int> in_degree;

    bool has_edge(int from, int to) const;
    size_t edge_count() const;
};

enum class TopoMode { strict, break_cycles };

struct TopoResult {
    std::vector<int> order;
    std::vector<std::pair<int, int>> removed_edges; // break_cycles mode only
};

// Tables grouped for joint offline encoding. Each group is a weakly-connected
// component; table order within a group follows the topological order.
struct EncodingPlan {
    struct Group {
        std::vector<int> tables;
        std::vector<int> offsets; // local token offset per table, filled by assign_offsets
    };

    std::vector<Group> groups;
    std::vector<int> group_of; // table_id -> index into groups

    // Fills per-table local token offsets; offsets are contiguous within a
    // group and start at 0.
    void assign_offsets(const std::vector<int>& token_count_by_table);
};

SchemaGraph build_graph(const std::vector<TableSchema>& schemas);

// Lowest table_id first among ready nodes. Strict mode throws CycleError with
// one offending cycle; break_cycles removes the last-discovered back edge and
// retries until the graph is acyclic, reporting removed edges.
TopoResult topological_order(const SchemaGraph& graph, TopoMode mode = TopoMode::strict);

EncodingPlan encoding_groups(const SchemaGraph& graph, const std::vector<int>& order);

// Schema corpus file: JSON array of tables (see README for the schema).
std::vector<TableSchema> load_schema_corpus(const std::string& path);
std::vector<TableSchema> parse_schema_corpus(const std::string& json_text);
std::string dump_schema_corpus(const std::vector<TableSchema>& schemas);

// Validates table_id density and foreign-key resolvability; throws on a
// malformed corpus. build_graph calls this itself.
void validate_corpus(const std::vector<TableSchema>& schemas);

} // namespace tablekv
