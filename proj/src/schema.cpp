#include "tablekv/schema.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tablekv {

bool SchemaGraph::has_edge(int from, int to) const {
    if (from < 0 || from >= node_count) return false;
    const auto& v = out_edges[from];
    return std::binary_search(v.begin(), v.end(), to);
}

size_t SchemaGraph::edge_count() const {
    size_t n = 0;
    for (const auto& v : out_edges) n += v.size();
    return n;
}

void validate_corpus(const std::vector<TableSchema>& schemas) {
    const int m = static_cast<int>(schemas.size());
    std::vector<char> seen(m, 0);
    for (const auto& t : schemas) {
        if (t.table_id < 0 || t.table_id >= m || seen[t.table_id])
            throw Error(Errc::bad_config,
                        "table_ids must be dense and unique in 0.." + std::to_string(m - 1) +
                            " (got " + std::to_string(t.table_id) + ")");
        seen[t.table_id] = 1;
        std::set<std::string> col_names;
        for (const auto& c : t.columns) {
            if (c.name.empty())
                throw Error(Errc::bad_config, "empty column name in table " + t.name);
            col_names.insert(c.name);
        }
        for (const auto& fk : t.foreign_keys) {
            if (fk.ref_table < 0 || fk.ref_table >= m)
                throw Error(Errc::dangling_foreign_key,
                            "table " + t.name + " references unknown table_id " +
                                std::to_string(fk.ref_table));
            if (!col_names.count(fk.column))
                throw Error(Errc::dangling_foreign_key,
                            "table " + t.name + " has no local column " + fk.column);
        }
    }
}

SchemaGraph build_graph(const std::vector<TableSchema>& schemas) {
    validate_corpus(schemas);
    SchemaGraph g;
    g.node_count = static_cast<int>(schemas.size());
    g.out_edges.assign(g.node_count, {});
    g.in_degree.assign(g.node_count, 0);

    // referenced -> referencing, multiple FKs between one pair collapse,
    // self-references carry no grouping information and are dropped
    std::set<std::pair<int, int>> pairs;
    for (const auto& t : schemas) {
        for (const auto& fk : t.foreign_keys) {
            if (fk.ref_table == t.table_id) continue;
            pairs.insert({fk.ref_table, t.table_id});
        }
    }
    for (const auto& [from, to] : pairs) {
        g.out_edges[from].push_back(to);
        g.in_degree[to]++;
    }
    for (auto& v : g.out_edges) std::sort(v.begin(), v.end());
    return g;
}

namespace {

// One offending cycle, found by walking from any node that survived Kahn's
// algorithm. All remaining nodes sit on or lead into a cycle.
std::vector<int> find_cycle(const SchemaGraph& g, const std::vector<int>& remaining_degree) {
    int start = -1;
    for (int v = 0; v < g.node_count; ++v) {
        if (remaining_degree[v] > 0) { start = v; break; }
    }
    std::vector<int> visited_at(g.node_count, -1);
    std::vector<int> path;
    int cur = start;
    while (visited_at[cur] < 0) {
        visited_at[cur] = static_cast<int>(path.size());
        path.push_back(cur);
        int next = -1;
        for (int w : g.out_edges[cur]) {
            if (remaining_degree[w] > 0) { next = w; break; }
        }
        cur = next;
    }
    return {path.begin() + visited_at[cur], path.end()};
}

struct KahnOutcome {
    std::vector<int> order;
    bool complete = false;
    std::vector<int> remaining_degree;
};

KahnOutcome kahn(const std::vector<std::vector<int>>& out_edges, int n) {
    KahnOutcome out;
    out.remaining_degree.assign(n, 0);
    for (int u = 0; u < n; ++u)
        for (int v : out_edges[u]) out.remaining_degree[v]++;

    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int v = 0; v < n; ++v)
        if (out.remaining_degree[v] == 0) ready.push(v);

    out.order.reserve(n);
    while (!ready.empty()) {
        int v = ready.top();
        ready.pop();
        out.order.push_back(v);
        for (int w : out_edges[v]) {
            if (--out.remaining_degree[w] == 0) ready.push(w);
        }
    }
    out.complete = static_cast<int>(out.order.size()) == n;
    return out;
}

// Back edges in DFS discovery order; roots and neighbors visited ascending.
std::vector<std::pair<int, int>> back_edges(const std::vector<std::vector<int>>& out_edges, int n) {
    std::vector<std::pair<int, int>> found;
    std::vector<int> state(n, 0); // 0 new, 1 on stack, 2 done

    struct Frame { int node; size_t next_child; };
    for (int root = 0; root < n; ++root) {
        if (state[root] != 0) continue;
        std::vector<Frame> stack{{root, 0}};
        state[root] = 1;
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_child < out_edges[f.node].size()) {
                int child = out_edges[f.node][f.next_child++];
                if (state[child] == 0) {
                    state[child] = 1;
                    stack.push_back({child, 0});
                } else if (state[child] == 1) {
                    found.push_back({f.node, child});
                }
            } else {
                state[f.node] = 2;
                stack.pop_back();
            }
        }
    }
    return found;
}

} // namespace

TopoResult topological_order(const SchemaGraph& graph, TopoMode mode) {
    TopoResult result;
    if (mode == TopoMode::strict) {
        auto out = kahn(graph.out_edges, graph.node_count);
        if (!out.complete) {
            auto cycle = find_cycle(graph, out.remaining_degree);
            throw CycleError(cycle, "schema graph contains a foreign-key cycle of " +
                                        std::to_string(cycle.size()) + " tables");
        }
        result.order = std::move(out.order);
        return result;
    }

    auto edges = graph.out_edges;
    while (true) {
        auto cyc = back_edges(edges, graph.node_count);
        if (cyc.empty()) break;
        auto [u, v] = cyc.back();
        auto& vec = edges[u];
        vec.erase(std::find(vec.begin(), vec.end(), v));
        result.removed_edges.push_back({u, v});
    }
    result.order = kahn(edges, graph.node_count).order;
    return result;
}

EncodingPlan encoding_groups(const SchemaGraph& graph, const std::vector<int>& order) {
    const int n = graph.node_count;
    // weakly-connected components by union-find
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int u = 0; u < n; ++u)
        for (int v : graph.out_edges[u]) parent[find(u)] = find(v);

    EncodingPlan plan;
    plan.group_of.assign(n, -1);
    std::vector<int> root_to_group(n, -1);
    // groups ordered by first appearance in `order`; tables within a group
    // keep their relative order, which stays a valid topological order
    for (int id : order) {
        int root = find(id);
        if (root_to_group[root] < 0) {
            root_to_group[root] = static_cast<int>(plan.groups.size());
            plan.groups.emplace_back();
        }
        int gi = root_to_group[root];
        plan.group_of[id] = gi;
        plan.groups[gi].tables.push_back(id);
    }
    return plan;
}

void EncodingPlan::assign_offsets(const std::vector<int>& token_count_by_table) {
    for (auto& g : groups) {
        g.offsets.resize(g.tables.size());
        int off = 0;
        for (size_t i = 0; i < g.tables.size(); ++i) {
            g.offsets[i] = off;
            off += token_count_by_table.at(static_cast<size_t>(g.tables[i]));
        }
    }
}

namespace {

TableSchema table_from_json(const nlohmann::json& j) {
    TableSchema t;
    t.table_id = j.at("table_id").get<int>();
    t.name = j.at("name").get<std::string>();
    for (const auto& c : j.at("columns")) {
        ColumnDef col;
        col.name = c.at("name").get<std::string>();
        col.description = c.value("description", "");
        col.is_primary_key = c.value("is_primary_key", false);
        t.columns.push_back(std::move(col));
    }
    if (j.contains("foreign_keys")) {
        for (const auto& f : j.at("foreign_keys")) {
            ForeignKey fk;
            fk.column = f.at("column").get<std::string>();
            fk.ref_table = f.at("ref_table").get<int>();
            fk.ref_column = f.at("ref_column").get<std::string>();
            t.foreign_keys.push_back(std::move(fk));
        }
    }
    return t;
}

} // namespace

std::vector<TableSchema> parse_schema_corpus(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io_error, std::string("schema corpus is not valid JSON: ") + e.what());
    }
    if (doc.is_object()) {
        if (doc.value("format_version", 0) != 1)
            throw Error(Errc::bad_config, "unsupported schema corpus format_version");
        if (!doc.contains("tables"))
            throw Error(Errc::bad_config, "schema corpus object lacks a tables array");
        doc = doc.at("tables");
    }
    if (!doc.is_array())
        throw Error(Errc::bad_config, "schema corpus must be a JSON array of tables");
    std::vector<TableSchema> tables;
    try {
        for (const auto& j : doc) tables.push_back(table_from_json(j));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::bad_config, std::string("malformed table entry: ") + e.what());
    }
    std::sort(tables.begin(), tables.end(),
              [](const TableSchema& a, const TableSchema& b) { return a.table_id < b.table_id; });
    validate_corpus(tables);
    return tables;
}

std::vector<TableSchema> load_schema_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open schema corpus: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_schema_corpus(ss.str());
}

std::string dump_schema_corpus(const std::vector<TableSchema>& schemas) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : schemas) {
        nlohmann::json jt;
        jt["table_id"] = t.table_id;
        jt["name"] = t.name;
        jt["columns"] = nlohmann::json::array();
        for (const auto& c : t.columns) {
            jt["columns"].push_back({{"name", c.name},
                                     {"description", c.description},
                                     {"is_primary_key", c.is_primary_key}});
        }
        jt["foreign_keys"] = nlohmann::json::array();
        for (const auto& f : t.foreign_keys) {
            jt["foreign_keys"].push_back(
                {{"column", f.column}, {"ref_table", f.ref_table}, {"ref_column", f.ref_column}});
        }
        arr.push_back(std::move(jt));
    }
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["tables"] = std::move(arr);
    return doc.dump(2) + "\n";
}

} // namespace tablekv
