#include "tablekv/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

#include <json.hpp>

namespace tablekv {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

void append_distinct(std::vector<int>& out, std::unordered_set<int>& seen, int id) {
    if (seen.insert(id).second) out.push_back(id);
}

// One cache access in the canonical trace. `size` is the transfer cost of
// the load (zero for hits), `evicted` the table the admission displaced.
struct LoadRec {
    int table = -1;
    bool miss = false;
    int evicted = -1;
    double size = 0;
};

struct WindowTrace {
    std::vector<LoadRec> boundary;               // demand gets at the window start
    std::vector<LoadRec> prefetch;               // admissions for upcoming queries
    std::vector<std::vector<LoadRec>> emergency; // per query: reloads of evicted tables
};

// The cache trajectory is a property of the plan alone: both modes replay
// the same demand gets, prefetch admissions, deferrals, and emergency
// reloads, so the hit/miss/swap/prefetch counters never depend on the mode.
// The modes only differ in when each recorded load occupies the transfer
// timeline.
struct Trace {
    std::vector<WindowTrace> windows;
    std::vector<double> compute; // per query cost, execution order
};

Trace build_trace(const BatchPlan& plan, const CostModel& cost, TieredCache& cache) {
    Trace tr;
    tr.windows.reserve(plan.windows.size());
    tr.compute.resize(plan.queries.size());
    const bool managed = cache.capacity() > 0;
    std::unordered_map<int, int> tokens;
    std::vector<int> pending; // deferred prefetches, carried across windows

    auto load_cost = [&](int token_count, bool swapped) {
        return cost.load_per_token * token_count + (swapped ? cost.switch_overhead : 0.0);
    };

    for (const auto& w : plan.windows) {
        WindowTrace wt;
        wt.emergency.resize(w.end - w.begin);
        std::unordered_set<int> demand_set(w.demand.begin(), w.demand.end());

        if (managed) {
            for (int t : w.demand) {
                GetResult r = cache.get(t);
                tokens[t] = r.kv->token_count;
                wt.boundary.push_back(
                    {t, !r.hit, r.evicted_id,
                     r.hit ? 0.0 : load_cost(r.kv->token_count, r.evicted_id >= 0)});
            }

            std::vector<int> candidates;
            std::unordered_set<int> seen;
            for (int t : pending) append_distinct(candidates, seen, t);
            for (int t : w.prefetch) append_distinct(candidates, seen, t);
            pending.clear();
            for (int t : candidates) {
                auto lu = plan.last_use.find(t);
                if (lu == plan.last_use.end() || lu->second < w.begin) continue;
                const int one[] = {t};
                if (cache.resident(t)) {
                    cache.prefetch(one); // recency refresh only
                    continue;
                }
                int victim = -1;
                if (cache.size() == cache.capacity()) {
                    victim = cache.evict_candidate();
                    if (demand_set.count(victim)) {
                        pending.push_back(t); // the victim is needed by this window
                        continue;
                    }
                }
                cache.prefetch(one);
                const int tok = cache.peek(t)->token_count;
                tokens[t] = tok;
                wt.prefetch.push_back({t, true, victim, load_cost(tok, victim >= 0)});
            }
        }

        for (size_t qi = w.begin; qi < w.end; ++qi) {
            const SimQuery& q = plan.queries[qi];
            auto& em = wt.emergency[qi - w.begin];
            for (int t : q.tables) {
                if (managed && cache.resident(t)) continue;
                GetResult r = cache.get(t);
                tokens[t] = r.kv->token_count;
                em.push_back({t, true, r.evicted_id,
                              load_cost(r.kv->token_count, r.evicted_id >= 0)});
            }
            double ctx = 0;
            for (int t : q.tables) ctx += tokens.at(t);
            tr.compute[qi] = cost.compute_per_token *
                             (ctx * q.query_tokens + q.query_tokens * q.query_tokens / 2.0);
        }
        tr.windows.push_back(std::move(wt));
    }
    return tr;
}

// A prefetch transfer in overlapped mode. It runs only while the demand
// timeline is idle and is canceled if its table is evicted before use.
struct BgJob {
    int table = -1;
    double size = 0;
    double issue = 0;
    double cancel = kNever;
    double end = 0;
    double wire = 0; // transfer time actually consumed
    bool evaluated = false;
};

// Sequential demand transfer timeline; background jobs see only its gaps.
struct DemandTimeline {
    double clock = 0;
    double total = 0;
    std::vector<std::pair<double, double>> busy;

    double schedule(double issue, double size) {
        const double start = std::max(issue, clock);
        clock = start + size;
        if (size > 0) busy.emplace_back(start, clock);
        total += size;
        return clock;
    }
};

} // namespace

BatchPlan schedule(std::vector<SimQuery> queries, int b_c, int b_m) {
    if (queries.empty()) throw Error(Errc::empty_batch, "cannot schedule an empty batch");
    if (b_c < 1 || b_m < 1) throw Error(Errc::bad_config, "b_c and b_m must be at least 1");

    BatchPlan plan;
    plan.b_c = b_c;
    plan.b_m = b_m;
    plan.queries = std::move(queries);
    const size_t n = plan.queries.size();

    for (size_t i = 0; i < n; ++i)
        for (int t : plan.queries[i].tables) plan.last_use[t] = i;

    for (size_t begin = 0; begin < n; begin += static_cast<size_t>(b_c)) {
        BatchPlan::Window w;
        w.begin = begin;
        w.end = std::min(n, begin + static_cast<size_t>(b_c));
        std::unordered_set<int> seen;
        for (size_t i = w.begin; i < w.end; ++i)
            for (int t : plan.queries[i].tables) append_distinct(w.demand, seen, t);
        seen.clear();
        const size_t look_end = std::min(n, w.end + static_cast<size_t>(b_m));
        for (size_t i = w.end; i < look_end; ++i)
            for (int t : plan.queries[i].tables) append_distinct(w.prefetch, seen, t);
        plan.windows.push_back(std::move(w));
    }
    return plan;
}

SimReport simulate(const BatchPlan& plan, const CostModel& cost, TieredCache& cache,
                   SimMode mode) {
    cost.validate();
    const bool managed = cache.capacity() > 0;
    const Trace tr = build_trace(plan, cost, cache);

    SimReport rep;
    DemandTimeline demand;
    std::vector<BgJob> jobs;
    std::unordered_map<int, double> ready;        // table -> load completion time
    std::unordered_map<int, size_t> pending_job;  // table -> index into jobs
    double cc = 0;

    // Lazy placement of background jobs into the demand timeline's gaps,
    // FIFO among themselves. A job is placed when its table is first
    // awaited; every demand interval that can precede its completion is
    // recorded by then, so the placement is exact. The wire cursor only
    // moves forward: a canceled job leaves it where scanning stopped, it
    // never backs up into spans already given to demand or earlier jobs.
    size_t next_uneval = 0;
    size_t busy_idx = 0;
    double wire_cursor = 0;
    auto evaluate_through = [&](size_t target) {
        while (next_uneval <= target) {
            BgJob& j = jobs[next_uneval];
            double cur = std::max(wire_cursor, j.issue);
            double rem = j.size;
            while (rem > 0) {
                if (cur >= j.cancel) break;
                double s = kNever;
                double e = kNever;
                if (busy_idx < demand.busy.size()) {
                    s = demand.busy[busy_idx].first;
                    e = demand.busy[busy_idx].second;
                }
                if (e <= cur) {
                    ++busy_idx;
                    continue;
                }
                if (s > cur) { // free span [cur, min(s, cancel))
                    const double take = std::min(rem, std::min(s, j.cancel) - cur);
                    j.wire += take;
                    rem -= take;
                    cur += take;
                    continue;
                }
                if (j.cancel <= e) { // evicted while preempted
                    cur = j.cancel;
                    break;
                }
                cur = e;
                ++busy_idx;
            }
            j.end = std::min(cur, j.cancel);
            j.evaluated = true;
            wire_cursor = std::max(wire_cursor, cur);
            ++next_uneval;
        }
    };

    auto evict_note = [&](int victim, double when) {
        if (victim < 0) return;
        ready.erase(victim);
        auto it = pending_job.find(victim);
        if (it != pending_job.end()) {
            BgJob& j = jobs[it->second];
            if (!j.evaluated) j.cancel = std::min(j.cancel, when);
            pending_job.erase(it);
        }
    };

    for (size_t wi = 0; wi < plan.windows.size(); ++wi) {
        const auto& w = plan.windows[wi];
        const auto& wt = tr.windows[wi];
        const double boundary = cc;

        for (const auto& rec : wt.boundary) {
            if (!rec.miss) continue;
            evict_note(rec.evicted, boundary);
            ready[rec.table] = demand.schedule(boundary, rec.size);
        }
        if (mode == SimMode::overlapped) {
            for (const auto& rec : wt.prefetch) {
                evict_note(rec.evicted, boundary);
                jobs.push_back({rec.table, rec.size, boundary});
                pending_job[rec.table] = jobs.size() - 1;
            }
        } else {
            for (const auto& rec : wt.prefetch) {
                evict_note(rec.evicted, boundary);
                ready[rec.table] = demand.schedule(boundary, rec.size);
            }
            cc = std::max(cc, demand.clock);
        }

        for (size_t qi = w.begin; qi < w.end; ++qi) {
            const SimQuery& q = plan.queries[qi];
            for (const auto& rec : wt.emergency[qi - w.begin]) {
                const double issue =
                    mode == SimMode::serial ? cc : (managed ? cc : boundary);
                evict_note(rec.evicted, issue);
                ready[rec.table] = demand.schedule(issue, rec.size);
            }
            double ready_q = 0;
            for (int t : q.tables) {
                if (auto p = pending_job.find(t); p != pending_job.end()) {
                    evaluate_through(p->second);
                    ready[t] = jobs[p->second].end;
                    pending_job.erase(p);
                }
                if (auto it = ready.find(t); it != ready.end())
                    ready_q = std::max(ready_q, it->second);
            }
            const double start = std::max(cc, ready_q);
            cc = start + tr.compute[qi];
            rep.total_compute += tr.compute[qi];
            rep.query_ids.push_back(q.query_id);
            rep.ttft.push_back(cc);
        }
    }
    if (!jobs.empty()) evaluate_through(jobs.size() - 1);

    for (double t : rep.ttft) rep.total_ttft += t;
    rep.makespan = cc;
    rep.total_transfer = demand.total;
    for (const auto& j : jobs) rep.total_transfer += j.wire;
    const auto& c = cache.counters();
    rep.hits = c.hits;
    rep.misses = c.misses;
    rep.swaps = c.swaps;
    rep.prefetch_loads = c.prefetch_loads;
    return rep;
}

SimReport run_batch(const std::vector<QueryRecord>& queries, const RunOptions& opts,
                    const CostModel& cost, std::shared_ptr<SlowTier> slow) {
    SimReport rep;
    if (queries.empty()) return rep;

    std::vector<size_t> order;
    if (opts.rerank_on) {
        order = rerank(queries, opts.seed, opts.anchor);
    } else {
        order.resize(queries.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    }

    std::vector<SimQuery> sims;
    sims.reserve(queries.size());
    for (size_t i : order) {
        const QueryRecord& q = queries[i];
        sims.push_back({q.query_id, q.tables, q.query_token_count});
    }

    BatchPlan plan = schedule(std::move(sims), opts.b_c, opts.b_m);
    const SimMode mode = opts.pipeline_on ? SimMode::overlapped : SimMode::serial;
    TieredCache cache(opts.capacity, opts.policy, slow);
    rep = simulate(plan, cost, cache, mode);

    if (mode == SimMode::overlapped) {
        TieredCache baseline(opts.capacity, opts.policy, slow);
        rep.serial_baseline_ttft = simulate(plan, cost, baseline, SimMode::serial).total_ttft;
    } else {
        rep.serial_baseline_ttft = rep.total_ttft;
    }
    return rep;
}

std::string SimReport::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["total_ttft"] = total_ttft;
    j["serial_baseline_ttft"] = serial_baseline_ttft;
    j["makespan"] = makespan;
    j["total_compute"] = total_compute;
    j["total_transfer"] = total_transfer;
    j["hits"] = hits;
    j["misses"] = misses;
    j["swaps"] = swaps;
    j["prefetch_loads"] = prefetch_loads;
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < ttft.size(); ++i)
        arr.push_back({{"query_id", query_ids[i]}, {"ttft", ttft[i]}});
    j["queries"] = arr;
    return j.dump(2);
}

std::string SimReport::to_csv() const {
    std::string out = "query_id,ttft\n";
    for (size_t i = 0; i < ttft.size(); ++i) {
        out += query_ids[i];
        out += ',';
        out += nlohmann::json(ttft[i]).dump();
        out += '\n';
    }
    return out;
}

} // namespace tablekv
