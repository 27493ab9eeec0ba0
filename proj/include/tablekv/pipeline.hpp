#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/rerank.hpp"
#include "tablekv/tiered_cache.hpp"

namespace tablekv {

// Time-unit model for the simulated clock. Compute for one query costs
// compute_per_token * (context_tokens * query_tokens + query_tokens^2 / 2);
// moving a table slow->fast costs load_per_token * its tokens, plus
// switch_overhead whenever the admission evicted something.
struct CostModel {
    double compute_per_token = 0.01;
    double load_per_token = 1.0;
    double switch_overhead = 5.0;

    void validate() const {
        if (compute_per_token < 0 || load_per_token < 0 || switch_overhead < 0)
            throw Error(Errc::bad_config, "cost model parameters must be non-negative");
    }
};

struct SimQuery {
    std::string query_id;
    std::vector<int> tables;  // matched table ids in assembly order
    int query_tokens = 0;     // tokens outside the matched table spans
};

// Compute micro-batches of size b_c plus, per window, the tables the next
// b_m queries need (the prefetch candidates serviced while this window
// computes).
struct BatchPlan {
    struct Window {
        size_t begin = 0;
        size_t end = 0;
        std::vector<int> demand;   // distinct tables, first-use order
        std::vector<int> prefetch; // distinct tables of the next b_m queries
    };

    int b_c = 0;
    int b_m = 0;
    std::vector<SimQuery> queries;
    std::vector<Window> windows;
    std::unordered_map<int, size_t> last_use; // table -> last query index using it
};

BatchPlan schedule(std::vector<SimQuery> queries, int b_c, int b_m);

enum class SimMode { overlapped, serial };

struct SimReport {
    std::vector<std::string> query_ids; // execution order
    std::vector<double> ttft;
    double total_ttft = 0;
    double makespan = 0;
    double total_compute = 0;
    double total_transfer = 0;
    double serial_baseline_ttft = 0;
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t swaps = 0;
    uint64_t prefetch_loads = 0;

    std::string to_json() const;
    std::string to_csv() const;
};

// Advances a compute timeline and a transfer timeline over the plan's
// windows. The cache trajectory (demand gets at each boundary, prefetch
// admissions with their deferral rule, emergency reloads after intra-window
// evictions) is replayed identically in both modes, so the counters are a
// property of the plan alone. Overlapped mode runs prefetch transfers in
// the gaps of the demand timeline (a prefetch never delays a demand load
// and is canceled if its table is evicted before use) and lets each query
// start as soon as its own tables are ready; serial mode finishes all of a
// window's loads before any of its queries compute.
SimReport simulate(const BatchPlan& plan, const CostModel& cost, TieredCache& cache,
                   SimMode mode);

struct RunOptions {
    bool rerank_on = true;
    bool pipeline_on = true;
    size_t capacity = 8;
    EvictionPolicy policy = EvictionPolicy::lru;
    int b_c = 100;
    int b_m = 10;
    uint64_t seed = 1;
    AnchorMode anchor = AnchorMode::seeded;
};

// Full serving path: optional rerank, schedule, simulate; the report's
// serial_baseline_ttft is always the same workload replayed in serial mode
// on a fresh cache.
SimReport run_batch(const std::vector<QueryRecord>& queries, const RunOptions& opts,
                    const CostModel& cost, std::shared_ptr<SlowTier> slow);

} // namespace tablekv
