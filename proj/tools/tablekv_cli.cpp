#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "tablekv/engine.hpp"
#include "tablekv/errors.hpp"
#include "tablekv/rng.hpp"
#include "tablekv/trie.hpp"

using namespace tablekv;

namespace {

struct Paths {
    std::string schema;
    std::string workload;
    std::string cache_dir;
    std::string config;
    uint64_t weight_seed = 1;
    bool break_cycles = false;
};

EngineOptions engine_options(const Paths& p) {
    EngineOptions eo;
    eo.schema_path = p.schema;
    eo.topo_mode = p.break_cycles ? TopoMode::break_cycles : TopoMode::strict;
    eo.weight_seed = p.weight_seed;
    return eo;
}

void apply_config_file(const std::string& path, RunOptions& opts, CostModel& cost) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open config: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::io_error, "config is not valid JSON: " + path + ": " + e.what());
    }
    if (!doc.is_object())
        throw Error(Errc::bad_config, "config must be a JSON object: " + path);

    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "format_version") {
                if (value.get<int>() != 1)
                    throw Error(Errc::bad_config, "unsupported config format_version in " + path);
            } else if (key == "capacity_C") {
                opts.capacity = value.get<size_t>();
            } else if (key == "policy") {
                opts.policy = parse_policy(value.get<std::string>());
            } else if (key == "b_c") {
                opts.b_c = value.get<int>();
            } else if (key == "b_m") {
                opts.b_m = value.get<int>();
            } else if (key == "compute_per_token") {
                cost.compute_per_token = value.get<double>();
            } else if (key == "load_per_token") {
                cost.load_per_token = value.get<double>();
            } else if (key == "switch_overhead") {
                cost.switch_overhead = value.get<double>();
            } else if (key == "rerank_on") {
                opts.rerank_on = value.get<bool>();
            } else if (key == "pipeline_on") {
                opts.pipeline_on = value.get<bool>();
            } else if (key == "seed") {
                opts.seed = value.get<uint64_t>();
            } else {
                throw Error(Errc::bad_config, "unknown config key \"" + key + "\" in " + path);
            }
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::bad_config, "bad value for config key \"" + key + "\" in " + path);
        }
    }
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write: " + path);
    out << body;
    if (!out) throw Error(Errc::io_error, "short write: " + path);
}

// Seeded subsample of query indices; n <= 0 means all.
std::vector<size_t> sample_indices(size_t total, int n, uint64_t seed) {
    std::vector<size_t> idx(total);
    for (size_t i = 0; i < total; ++i) idx[i] = i;
    if (n <= 0 || static_cast<size_t>(n) >= total) return idx;
    SeededRng rng(seed);
    for (size_t i = 0; i < static_cast<size_t>(n); ++i) {
        const size_t j = i + rng.next_below(total - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<size_t>(n));
    return idx;
}

double verify_sample(const Engine& engine, SlowTier& slow,
                     const std::vector<WorkloadEntry>& workload, int sample,
                     uint64_t seed, size_t& checked) {
    double max_diff = 0;
    const auto indices = sample_indices(workload.size(), sample, seed);
    for (size_t i : indices) {
        AnalyzedQuery q = analyze_query(engine, workload[i].query_id, workload[i].text);
        max_diff = std::max(max_diff, verify_query(engine, slow, q));
    }
    checked = indices.size();
    return max_diff;
}

int cmd_precompute(const Paths& p) {
    Engine engine = build_engine(engine_options(p));
    precompute_corpus(engine, p.cache_dir);
    std::cout << "precomputed " << engine.table_count() << " tables in "
              << engine.plan.groups.size() << " groups -> " << p.cache_dir << "\n";
    return 0;
}

struct RunFlags {
    bool verify = false;
    bool ablate = false;
    int sample = 8;
    double tolerance = 1e-5;
    std::string json_path;
    std::string csv_path;
};

int cmd_run(const Paths& p, const RunOptions& opts, const CostModel& cost,
            const RunFlags& flags) {
    Engine engine = build_engine(engine_options(p));
    check_manifest(engine, p.cache_dir);
    const auto workload = load_workload(p.workload);
    auto slow = std::make_shared<FileSlowTier>(p.cache_dir);

    if (workload.empty()) {
        std::cout << SimReport{}.to_json() << "\n";
        return 0;
    }

    if (flags.ablate) {
        auto with = [&](bool rerank_on, bool pipeline_on, size_t capacity) {
            RunOptions o = opts;
            o.rerank_on = rerank_on;
            o.pipeline_on = pipeline_on;
            o.capacity = capacity;
            return run_workload(engine, workload, o, cost, slow).total_ttft;
        };
        const double full = with(true, true, opts.capacity);
        const double no_pipe = with(true, false, opts.capacity);
        const double no_rerank = with(false, true, opts.capacity);
        const double no_mgmt = with(true, false, 0);
        std::cout << "full            " << full << "\n"
                  << "w/o pipeline    " << no_pipe << "\n"
                  << "w/o rerank      " << no_rerank << "\n"
                  << "w/o cache mgmt  " << no_mgmt << "\n"
                  << "monotone        "
                  << ((full <= no_pipe && no_pipe <= no_rerank && no_rerank <= no_mgmt)
                          ? "true" : "false")
                  << "\n";
        return 0;
    }

    SimReport report = run_workload(engine, workload, opts, cost, slow);
    if (!flags.json_path.empty()) write_file(flags.json_path, report.to_json() + "\n");
    if (!flags.csv_path.empty()) write_file(flags.csv_path, report.to_csv());
    if (flags.json_path.empty() && flags.csv_path.empty())
        std::cout << report.to_json() << "\n";

    if (flags.verify) {
        size_t checked = 0;
        const double diff =
            verify_sample(engine, *slow, workload, flags.sample, opts.seed, checked);
        std::cout << "verify: max abs diff " << diff << " over " << checked
                  << " queries (tolerance " << flags.tolerance << ")\n";
        if (diff > flags.tolerance)
            throw Error(Errc::verify_failed, "assembled outputs diverge from the prefill oracle");
    }
    return 0;
}

int cmd_verify(const Paths& p, uint64_t seed, int sample, double tolerance) {
    Engine engine = build_engine(engine_options(p));
    check_manifest(engine, p.cache_dir);
    const auto workload = load_workload(p.workload);
    FileSlowTier slow(p.cache_dir);

    size_t checked = 0;
    const double diff = verify_sample(engine, slow, workload, sample, seed, checked);
    std::cout << "verify: max abs diff " << diff << " over " << checked
              << " queries (tolerance " << tolerance << ")\n";
    if (diff > tolerance)
        throw Error(Errc::verify_failed, "assembled outputs diverge from the prefill oracle");
    return 0;
}

double seconds_of(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

// Token-stream scaling of match_all: 50 random tables embedded in noise.
nlohmann::json match_all_curve() {
    SeededRng rng(7);
    TableTrie trie;
    std::vector<std::vector<TokenId>> tables(50);
    for (int id = 0; id < 50; ++id) {
        tables[id].resize(30 + rng.next_below(31));
        for (auto& t : tables[id]) t = static_cast<TokenId>(rng.next_below(1000));
        trie.insert(tables[id], id, static_cast<CacheHandle>(id));
    }
    nlohmann::json curve = nlohmann::json::array();
    for (size_t n : {10'000u, 20'000u, 40'000u}) {
        std::vector<TokenId> stream;
        stream.reserve(n + 64);
        while (stream.size() < n) {
            if (rng.next_below(10) == 0) {
                const auto& t = tables[rng.next_below(50)];
                stream.insert(stream.end(), t.begin(), t.end());
            } else {
                stream.push_back(static_cast<TokenId>(rng.next_below(1000)));
            }
        }
        stream.resize(n);
        double best = 1e9;
        size_t matches = 0;
        for (int rep = 0; rep < 3; ++rep)
            best = std::min(best, seconds_of([&] { matches = trie.match_all(stream).size(); }));
        curve.push_back({{"tokens", n}, {"matches", matches}, {"seconds", best}});
    }
    return curve;
}

nlohmann::json rerank_curve() {
    SeededRng rng(11);
    nlohmann::json curve = nlohmann::json::array();
    for (size_t n : {256u, 512u, 1024u}) {
        std::vector<QueryRecord> qs;
        qs.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            std::vector<int> tables;
            for (int k = 0; k < 4; ++k) tables.push_back(static_cast<int>(rng.next_below(64)));
            qs.push_back(make_query_record("q" + std::to_string(i), {}, tables, 64, 10));
        }
        double best = 1e9;
        for (int rep = 0; rep < 3; ++rep)
            best = std::min(best, seconds_of([&] { rerank(qs, 1); }));
        curve.push_back({{"batch", n}, {"seconds", best}});
    }
    return curve;
}

int cmd_bench(const Paths& p, const RunOptions& opts, const CostModel& cost, bool scaling) {
    Engine engine = build_engine(engine_options(p));
    check_manifest(engine, p.cache_dir);
    const auto workload = load_workload(p.workload);
    auto slow = std::make_shared<FileSlowTier>(p.cache_dir);
    if (workload.empty()) throw Error(Errc::empty_batch, "bench needs a non-empty workload");

    RunOptions full = opts;
    full.rerank_on = true;
    full.pipeline_on = true;
    RunOptions no_mgmt = opts;
    no_mgmt.rerank_on = true;
    no_mgmt.pipeline_on = false;
    no_mgmt.capacity = 0;

    const SimReport a = run_workload(engine, workload, full, cost, slow);
    const SimReport b = run_workload(engine, workload, no_mgmt, cost, slow);
    const double speedup = b.total_ttft / a.total_ttft;

    nlohmann::json out;
    out["format_version"] = 1;
    out["full_total_ttft"] = a.total_ttft;
    out["no_cache_mgmt_total_ttft"] = b.total_ttft;
    out["speedup"] = speedup;
    if (scaling) {
        out["match_all_scaling"] = match_all_curve();
        out["rerank_scaling"] = rerank_curve();
    }
    std::cout << out.dump(2) << "\n";

    if (!(speedup > 1.0))
        throw Error(Errc::verify_failed, "expected full system to beat no-cache-management");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"table-granular KV cache serving engine"};
    app.require_subcommand(1);

    Paths paths;
    RunOptions opts;
    CostModel cost;
    RunFlags run_flags;
    bool scaling = false;
    int verify_sample_n = 0;
    double verify_tolerance = 1e-5;

    auto add_schema = [&](CLI::App* cmd) {
        cmd->add_option("--schema", paths.schema, "schema corpus JSON")->required();
        cmd->add_option("--weight-seed", paths.weight_seed, "model weight seed");
        cmd->add_flag("--break-cycles", paths.break_cycles,
                      "drop back edges instead of rejecting cyclic PFK graphs");
    };
    auto add_cache = [&](CLI::App* cmd) {
        cmd->add_option("--cache-dir", paths.cache_dir, "precomputed KV directory")->required();
    };
    auto add_workload = [&](CLI::App* cmd) {
        cmd->add_option("--workload", paths.workload, "workload JSONL")->required();
    };

    // Pipeline config: defaults, then config file, then explicit flags.
    size_t f_capacity = 0;
    std::string f_policy;
    int f_bc = 0, f_bm = 0;
    double f_cpt = 0, f_lpt = 0, f_switch = 0;
    bool f_rerank = true, f_pipeline = true;
    uint64_t f_seed = 0;
    struct ConfigOpts {
        CLI::Option* capacity;
        CLI::Option* policy;
        CLI::Option* bc;
        CLI::Option* bm;
        CLI::Option* cpt;
        CLI::Option* lpt;
        CLI::Option* sw;
        CLI::Option* rerank;
        CLI::Option* pipeline;
        CLI::Option* seed;
    };
    auto add_config = [&](CLI::App* cmd) {
        ConfigOpts co;
        cmd->add_option("--config", paths.config, "pipeline config JSON");
        co.capacity = cmd->add_option("--capacity", f_capacity, "fast-tier slots (0 = load-through)");
        co.policy = cmd->add_option("--policy", f_policy, "lru | fifo | lfu");
        co.bc = cmd->add_option("--b-c", f_bc, "compute micro-batch size");
        co.bm = cmd->add_option("--b-m", f_bm, "prefetch lookahead in queries");
        co.cpt = cmd->add_option("--compute-per-token", f_cpt);
        co.lpt = cmd->add_option("--load-per-token", f_lpt);
        co.sw = cmd->add_option("--switch-overhead", f_switch);
        co.rerank = cmd->add_flag("--rerank,!--no-rerank", f_rerank, "XOR-Hamming reranking");
        co.pipeline = cmd->add_flag("--pipeline,!--no-pipeline", f_pipeline, "compute/transfer overlap");
        co.seed = cmd->add_option("--seed", f_seed, "rerank anchor seed");
        return co;
    };
    auto resolve_config = [&](const ConfigOpts& co) {
        if (!paths.config.empty()) apply_config_file(paths.config, opts, cost);
        if (co.capacity->count()) opts.capacity = f_capacity;
        if (co.policy->count()) opts.policy = parse_policy(f_policy);
        if (co.bc->count()) opts.b_c = f_bc;
        if (co.bm->count()) opts.b_m = f_bm;
        if (co.cpt->count()) cost.compute_per_token = f_cpt;
        if (co.lpt->count()) cost.load_per_token = f_lpt;
        if (co.sw->count()) cost.switch_overhead = f_switch;
        if (co.rerank->count()) opts.rerank_on = f_rerank;
        if (co.pipeline->count()) opts.pipeline_on = f_pipeline;
        if (co.seed->count()) opts.seed = f_seed;
        cost.validate();
    };

    CLI::App* pre = app.add_subcommand("precompute", "encode every table and write the KV cache directory");
    add_schema(pre);
    add_cache(pre);

    CLI::App* run = app.add_subcommand("run", "serve a workload and report simulated latency");
    add_schema(run);
    add_cache(run);
    add_workload(run);
    const ConfigOpts run_co = add_config(run);
    run->add_flag("--verify", run_flags.verify, "spot-check assembled outputs against the prefill oracle");
    run->add_option("--sample", run_flags.sample, "queries to verify (0 = all)");
    run->add_option("--tolerance", run_flags.tolerance, "max abs diff allowed by --verify");
    run->add_flag("--ablate", run_flags.ablate, "run the four ablation configs and print their total TTFT");
    run->add_option("--json", run_flags.json_path, "write the report JSON here instead of stdout");
    run->add_option("--csv", run_flags.csv_path, "write the per-query CSV here");

    CLI::App* ver = app.add_subcommand("verify", "compare assembled outputs against the prefill oracle");
    add_schema(ver);
    add_cache(ver);
    add_workload(ver);
    ver->add_option("--sample", verify_sample_n, "queries to verify (0 = all)");
    ver->add_option("--tolerance", verify_tolerance, "max abs diff allowed");
    ver->add_option("--seed", opts.seed, "sampling seed");

    CLI::App* bench = app.add_subcommand("bench", "measure full system against no cache management");
    add_schema(bench);
    add_cache(bench);
    add_workload(bench);
    const ConfigOpts bench_co = add_config(bench);
    bench->add_flag("--scaling", scaling, "also time match_all and rerank scaling curves");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (pre->parsed()) return cmd_precompute(paths);
        if (run->parsed()) {
            resolve_config(run_co);
            return cmd_run(paths, opts, cost, run_flags);
        }
        if (ver->parsed()) return cmd_verify(paths, opts.seed, verify_sample_n, verify_tolerance);
        if (bench->parsed()) {
            resolve_config(bench_co);
            return cmd_bench(paths, opts, cost, scaling);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == Errc::verify_failed ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
