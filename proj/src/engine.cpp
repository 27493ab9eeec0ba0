#include "tablekv/engine.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace fs = std::filesystem;

namespace tablekv {

Engine build_engine(const EngineOptions& opts) {
    Engine e;
    e.options = opts;
    e.corpus = load_schema_corpus(opts.schema_path);
    e.graph = build_graph(e.corpus);
    e.topo = topological_order(e.graph, opts.topo_mode);
    e.plan = encoding_groups(e.graph, e.topo.order);

    const int n = e.table_count();
    e.serialized.resize(n);
    e.table_tokens.resize(n);
    for (int i = 0; i < n; ++i) {
        e.serialized[i] = serialize_table(e.corpus[i]);
        e.tokenizer.add_corpus_text(e.serialized[i]);
    }
    std::vector<int> counts(n);
    for (int i = 0; i < n; ++i) {
        e.table_tokens[i] = e.tokenizer.encode(e.serialized[i]);
        counts[i] = static_cast<int>(e.table_tokens[i].size());
    }
    e.plan.assign_offsets(counts);
    e.local_offset.assign(n, 0);
    for (const auto& g : e.plan.groups)
        for (size_t i = 0; i < g.tables.size(); ++i) e.local_offset[g.tables[i]] = g.offsets[i];

    e.config.num_layers = opts.num_layers;
    e.config.num_heads = opts.num_heads;
    e.config.head_dim = opts.head_dim;
    e.config.rotary_base = opts.rotary_base;
    e.config.weight_seed = opts.weight_seed;
    e.config.vocab_size = e.tokenizer.vocab_size();
    e.weights = ModelWeights<float>::create(e.config);

    for (int i = 0; i < n; ++i)
        e.trie.insert(e.table_tokens[i], i, static_cast<CacheHandle>(i));
    return e;
}

namespace {

nlohmann::json manifest_json(const Engine& e) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["model"] = {{"num_layers", e.config.num_layers},
                  {"num_heads", e.config.num_heads},
                  {"head_dim", e.config.head_dim},
                  {"vocab_size", e.config.vocab_size},
                  {"rotary_base", e.config.rotary_base},
                  {"weight_seed", e.config.weight_seed}};
    j["tokenizer_hash"] = e.tokenizer.vocab_hash();
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : e.plan.groups) groups.push_back(g.tables);
    j["groups"] = std::move(groups);
    nlohmann::json tables = nlohmann::json::array();
    for (int i = 0; i < e.table_count(); ++i) {
        tables.push_back({{"table_id", i},
                          {"name", e.corpus[i].name},
                          {"group", e.plan.group_of[i]},
                          {"local_offset", e.local_offset[i]},
                          {"token_count", static_cast<int>(e.table_tokens[i].size())}});
    }
    j["tables"] = std::move(tables);
    return j;
}

} // namespace

void precompute_corpus(const Engine& engine, const std::string& cache_dir) {
    const fs::path final_dir(cache_dir);
    const fs::path tmp_dir(cache_dir + ".tmp");
    std::error_code ec;
    fs::remove_all(tmp_dir, ec);
    if (!fs::create_directories(tmp_dir))
        throw Error(Errc::io_error, "cannot create directory " + tmp_dir.string());

    try {
        for (const auto& g : engine.plan.groups) {
            std::vector<GroupTableRef<float>> refs;
            refs.reserve(g.tables.size());
            for (int id : g.tables)
                refs.push_back({id, std::span<const TokenId>(engine.table_tokens[id])});
            auto kvs = encode_group<float>(engine.config, engine.weights, refs);
            for (const auto& kv : kvs)
                save_table_kv((tmp_dir / (std::to_string(kv.table_id) + ".kv")).string(), kv);
        }
        std::ofstream mf(tmp_dir / "manifest.json", std::ios::binary);
        if (!mf) throw Error(Errc::io_error, "cannot write manifest");
        mf << manifest_json(engine).dump(2) << "\n";
        mf.close();

        fs::remove_all(final_dir, ec);
        fs::rename(tmp_dir, final_dir);
    } catch (...) {
        fs::remove_all(tmp_dir, ec);
        throw;
    }
}

void check_manifest(const Engine& engine, const std::string& cache_dir) {
    const fs::path mf = fs::path(cache_dir) / "manifest.json";
    if (!fs::is_directory(cache_dir) || !fs::exists(mf))
        throw Error(Errc::missing_cache_dir,
                    "no precomputed cache at " + cache_dir + " (run precompute first)");
    std::ifstream in(mf, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    nlohmann::json found;
    try {
        found = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io_error, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (found != manifest_json(engine))
        throw Error(Errc::bad_config,
                    "cache at " + cache_dir + " was precomputed from different inputs");
}

AnalyzedQuery analyze_query(const Engine& engine, std::string query_id,
                            const std::string& text) {
    AnalyzedQuery q;
    q.tokens = engine.tokenizer.encode(text);
    q.spans = engine.trie.match_all(q.tokens);

    std::unordered_set<int> seen;
    size_t cursor = 0;
    for (const auto& s : q.spans) {
        if (seen.insert(s.table_id).second) q.match_order.push_back(s.table_id);
        for (size_t i = cursor; i < s.start; ++i) q.remainder.push_back(q.tokens[i]);
        cursor = s.end;
    }
    for (size_t i = cursor; i < q.tokens.size(); ++i) q.remainder.push_back(q.tokens[i]);

    q.record = make_query_record(std::move(query_id), q.tokens, q.match_order,
                                 engine.table_count(), static_cast<int>(q.remainder.size()));
    return q;
}

std::vector<int> assembly_order(const Engine& engine, const std::vector<int>& match_order) {
    std::vector<int> group_sequence;
    std::unordered_map<int, std::vector<int>> members;
    for (int id : match_order) {
        const int g = engine.plan.group_of.at(id);
        auto [it, inserted] = members.try_emplace(g);
        if (inserted) group_sequence.push_back(g);
        it->second.push_back(id);
    }
    std::vector<int> order;
    order.reserve(match_order.size());
    for (int g : group_sequence) {
        auto& ids = members[g];
        std::sort(ids.begin(), ids.end(), [&](int a, int b) {
            return engine.local_offset[a] < engine.local_offset[b];
        });
        order.insert(order.end(), ids.begin(), ids.end());
    }
    return order;
}

double verify_query(const Engine& engine, SlowTier& slow, const AnalyzedQuery& q) {
    const auto order = assembly_order(engine, q.match_order);

    std::vector<TableKV<float>> kvs;
    kvs.reserve(order.size());
    for (int id : order) kvs.push_back(*slow.load(id));
    const auto ctx = assemble<float>(engine.config, engine.plan, kvs, order);
    const auto served = query_attend<float>(engine.config, engine.weights, ctx, q.remainder);

    std::vector<TokenId> concat;
    BlockMask mask;
    for (int id : order) {
        concat.insert(concat.end(), engine.table_tokens[id].begin(),
                      engine.table_tokens[id].end());
        mask.append_block(engine.plan.group_of[id],
                          static_cast<int>(engine.table_tokens[id].size()));
    }
    concat.insert(concat.end(), q.remainder.begin(), q.remainder.end());
    mask.append_block(kQueryGroup, static_cast<int>(q.remainder.size()));

    const auto oracle = prefill<float>(engine.config, engine.weights, concat, mask);
    const size_t hidden = static_cast<size_t>(engine.config.hidden_dim());
    const size_t ctx_tokens = concat.size() - q.remainder.size();

    double max_diff = 0.0;
    for (size_t i = 0; i < q.remainder.size() * hidden; ++i) {
        const double d = std::abs(static_cast<double>(served[i]) -
                                  static_cast<double>(oracle.hidden[ctx_tokens * hidden + i]));
        max_diff = std::max(max_diff, d);
    }
    return max_diff;
}

std::vector<WorkloadEntry> load_workload(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open workload: " + path);
    std::vector<WorkloadEntry> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::io_error, path + ":" + std::to_string(lineno) +
                                            ": invalid JSON: " + e.what());
        }
        if (lineno == 1 && j.contains("format_version") && !j.contains("query_id")) {
            if (j["format_version"] != 1)
                throw Error(Errc::bad_config, "unsupported workload format_version");
            continue;
        }
        try {
            out.push_back({j.at("query_id").get<std::string>(), j.at("text").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::bad_config, path + ":" + std::to_string(lineno) +
                                              ": workload entry: " + e.what());
        }
    }
    return out;
}

std::string dump_workload(const std::vector<WorkloadEntry>& entries) {
    std::string out = nlohmann::json{{"format_version", 1}}.dump() + "\n";
    for (const auto& e : entries)
        out += nlohmann::json{{"query_id", e.query_id}, {"text", e.text}}.dump() + "\n";
    return out;
}

SimReport run_workload(const Engine& engine, const std::vector<WorkloadEntry>& workload,
                       const RunOptions& opts, const CostModel& cost,
                       std::shared_ptr<SlowTier> slow) {
    std::vector<QueryRecord> records;
    records.reserve(workload.size());
    for (const auto& w : workload) {
        AnalyzedQuery q = analyze_query(engine, w.query_id, w.text);
        QueryRecord rec = std::move(q.record);
        // serving order matters for the simulator's first-use accounting
        rec.tables = assembly_order(engine, q.match_order);
        records.push_back(std::move(rec));
    }
    return run_batch(records, opts, cost, std::move(slow));
}

} // namespace tablekv
