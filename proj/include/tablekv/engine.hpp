#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tablekv/attention.hpp"
#include "tablekv/model.hpp"
#include "tablekv/pipeline.hpp"
#include "tablekv/rerank.hpp"
#include "tablekv/schema.hpp"
#include "tablekv/serialize.hpp"
#include "tablekv/tiered_cache.hpp"
#include "tablekv/tokenizer.hpp"
#include "tablekv/trie.hpp"

namespace tablekv {

struct EngineOptions {
    std::string schema_path;
    TopoMode topo_mode = TopoMode::strict;
    int num_layers = 2;
    int num_heads = 4;
    int head_dim = 16;
    double rotary_base = 10000.0;
    uint64_t weight_seed = 1;
};

// Everything derivable from the schema corpus alone: graph, encoding plan,
// tokenizer, serializations, trie, model weights. Rebuilt identically on
// every run; the precompute directory only adds the heavy KV tensors.
struct Engine {
    EngineOptions options;
    ModelConfig config;
    ModelWeights<float> weights;
    std::vector<TableSchema> corpus;
    SchemaGraph graph;
    TopoResult topo;
    EncodingPlan plan;
    Tokenizer tokenizer;
    std::vector<std::string> serialized;            // by table_id
    std::vector<std::vector<TokenId>> table_tokens; // by table_id
    std::vector<int> local_offset;                  // by table_id
    TableTrie trie;

    int table_count() const { return static_cast<int>(corpus.size()); }
};

Engine build_engine(const EngineOptions& opts);

// Encodes every group and writes <table_id>.kv files plus manifest.json,
// staged in a temp directory and renamed into place so failures leave no
// partial output.
void precompute_corpus(const Engine& engine, const std::string& cache_dir);

// Confirms manifest.json matches this engine (model config, tokenizer hash,
// plan); throws MissingCacheDir / BadConfig.
void check_manifest(const Engine& engine, const std::string& cache_dir);

struct AnalyzedQuery {
    QueryRecord record;
    std::vector<TokenId> tokens;    // full prompt
    std::vector<MatchSpan> spans;
    std::vector<int> match_order;   // distinct table ids, first occurrence
    std::vector<TokenId> remainder; // tokens outside spans, in order
};

AnalyzedQuery analyze_query(const Engine& engine, std::string query_id,
                            const std::string& text);

// Serving order for a set of matched tables: groups by first occurrence,
// each group contiguous in ascending local offset.
std::vector<int> assembly_order(const Engine& engine, const std::vector<int>& match_order);

// Max abs diff between the cache-assembled answer for this query and a full
// block-masked prefill over the same token layout.
double verify_query(const Engine& engine, SlowTier& slow, const AnalyzedQuery& q);

struct WorkloadEntry {
    std::string query_id;
    std::string text;
};

std::vector<WorkloadEntry> load_workload(const std::string& path);
std::string dump_workload(const std::vector<WorkloadEntry>& entries);

SimReport run_workload(const Engine& engine, const std::vector<WorkloadEntry>& workload,
                       const RunOptions& opts, const CostModel& cost,
                       std::shared_ptr<SlowTier> slow);

} // namespace tablekv
