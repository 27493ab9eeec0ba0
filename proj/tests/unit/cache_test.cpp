#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "policy_reference.hpp"
#include "tablekv/errors.hpp"
#include "tablekv/rng.hpp"
#include "tablekv/table_kv.hpp"
#include "tablekv/tiered_cache.hpp"

using namespace tablekv;

namespace {

TableKV<float> meta_kv(int id) {
    TableKV<float> kv;
    kv.table_id = id;
    kv.token_count = id + 1;
    kv.num_heads = 4;
    kv.head_dim = 16;
    return kv;
}

std::shared_ptr<MemorySlowTier> make_slow(int n_tables) {
    auto slow = std::make_shared<MemorySlowTier>();
    for (int id = 0; id < n_tables; ++id)
        slow->put(meta_kv(id));
    return slow;
}

refmodel::ReferenceCache::Kind ref_kind(EvictionPolicy p) {
    switch (p) {
    case EvictionPolicy::lru: return refmodel::ReferenceCache::LRU;
    case EvictionPolicy::fifo: return refmodel::ReferenceCache::FIFO;
    case EvictionPolicy::lfu: return refmodel::ReferenceCache::LFU;
    }
    return refmodel::ReferenceCache::LRU;
}

constexpr int A = 0, B = 1, C = 2;

} // namespace

TEST_SUITE("tiered-cache") {

TEST_CASE("LRU keeps the refreshed entry") {
    TieredCache cache(2, EvictionPolicy::lru, make_slow(3));
    CHECK_FALSE(cache.get(A).hit);
    CHECK_FALSE(cache.get(B).hit);
    CHECK(cache.get(A).hit);
    const auto res = cache.get(C);
    CHECK_FALSE(res.hit);
    CHECK(res.evicted_id == B);
    CHECK(cache.residents() == std::vector<int>{A, C});
    CHECK(cache.counters().hits == 1);
    CHECK(cache.counters().misses == 3);
    CHECK(cache.counters().swaps == 1);
}

TEST_CASE("FIFO ignores re-access") {
    TieredCache cache(2, EvictionPolicy::fifo, make_slow(3));
    cache.get(A);
    cache.get(B);
    CHECK(cache.get(A).hit);
    const auto res = cache.get(C);
    CHECK(res.evicted_id == A);
    CHECK(cache.residents() == std::vector<int>{B, C});
}

TEST_CASE("single entry reaches steady state after one miss") {
    for (auto policy : {EvictionPolicy::lru, EvictionPolicy::fifo, EvictionPolicy::lfu}) {
        CAPTURE(policy_name(policy));
        TieredCache cache(1, policy, make_slow(1));
        for (int i = 0; i < 5; ++i)
            cache.get(A);
        CHECK(cache.counters().misses == 1);
        CHECK(cache.counters().hits == 4);
        CHECK(cache.counters().swaps == 0);
    }
}

TEST_CASE("eviction candidates per policy") {
    SUBCASE("LFU ties break toward the older timestamp") {
        TieredCache cache(3, EvictionPolicy::lfu, make_slow(3));
        cache.get(A);
        cache.get(A);
        cache.get(A);
        cache.get(B);
        cache.get(C);
        CHECK(cache.evict_candidate() == B);
    }

    SUBCASE("LRU points at the stalest entry") {
        TieredCache cache(3, EvictionPolicy::lru, make_slow(3));
        cache.get(A);
        cache.get(B);
        cache.get(C);
        CHECK(cache.evict_candidate() == A);
    }

    SUBCASE("FIFO ignores hits entirely") {
        TieredCache cache(3, EvictionPolicy::fifo, make_slow(3));
        cache.get(A);
        cache.get(B);
        cache.get(C);
        cache.get(A);
        cache.get(A);
        CHECK(cache.evict_candidate() == A);
    }

    SUBCASE("asking before the tier is full is an error") {
        TieredCache cache(3, EvictionPolicy::lru, make_slow(3));
        cache.get(A);
        try {
            cache.evict_candidate();
            FAIL("expected CacheNotFull");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::cache_not_full);
        }
    }
}

TEST_CASE("prefetch fills cold entries and refreshes resident ones") {
    SUBCASE("cold fill") {
        TieredCache cache(2, EvictionPolicy::lru, make_slow(3));
        const std::vector<int> ids{A, B};
        const auto admitted = cache.prefetch(ids);
        CHECK(admitted == std::vector<int>{A, B});
        CHECK(cache.counters().prefetch_loads == 2);
        CHECK(cache.counters().misses == 0);
        CHECK(cache.counters().hits == 0);
    }

    SUBCASE("resident id only refreshes recency") {
        TieredCache cache(2, EvictionPolicy::lru, make_slow(3));
        cache.get(A);
        cache.get(B);
        const std::vector<int> ids{A};
        CHECK(cache.prefetch(ids).empty());
        CHECK(cache.counters().prefetch_loads == 0);
        // A was refreshed, so the next eviction hits B.
        CHECK(cache.get(C).evicted_id == B);
    }

    SUBCASE("overflowing prefetch evicts per policy") {
        TieredCache cache(2, EvictionPolicy::lru, make_slow(3));
        const std::vector<int> ids{A, B, C};
        const auto admitted = cache.prefetch(ids);
        CHECK(admitted == std::vector<int>{A, B, C});
        CHECK(cache.residents() == std::vector<int>{B, C});
        CHECK(cache.counters().prefetch_loads == 3);
        CHECK(cache.counters().swaps == 1);
    }

    SUBCASE("capacity zero makes prefetch a no-op") {
        TieredCache cache(0, EvictionPolicy::lru, make_slow(3));
        const std::vector<int> ids{A, B};
        CHECK(cache.prefetch(ids).empty());
        CHECK(cache.counters().prefetch_loads == 0);
        CHECK(cache.size() == 0);
    }
}

TEST_CASE("capacity zero degenerates to load-through") {
    TieredCache cache(0, EvictionPolicy::lfu, make_slow(2));
    for (int i = 0; i < 3; ++i) {
        const auto res = cache.get(A);
        CHECK_FALSE(res.hit);
        CHECK(res.evicted_id == -1);
        REQUIRE(res.kv);
        CHECK(res.kv->table_id == A);
    }
    CHECK(cache.counters().misses == 3);
    CHECK(cache.size() == 0);
    CHECK_FALSE(cache.resident(A));
    CHECK_THROWS_AS(cache.evict_candidate(), Error);
}

TEST_CASE("unknown tables are rejected by both tiers") {
    TieredCache cache(2, EvictionPolicy::lru, make_slow(2));
    try {
        cache.get(17);
        FAIL("expected UnknownTable");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_table);
    }

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tablekv_cache_test";
    fs::create_directories(dir);
    save_table_kv((dir / "3.kv").string(), meta_kv(3));
    save_table_kv((dir / "5.kv").string(), meta_kv(4)); // wrong id inside the file

    FileSlowTier files(dir);
    CHECK(files.contains(3));
    CHECK_FALSE(files.contains(4));
    CHECK(files.load(3)->table_id == 3);
    CHECK_THROWS_AS(files.load(99), Error);
    try {
        files.load(5);
        FAIL("expected IoError for mismatched id");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::io_error);
    }
    fs::remove_all(dir);
}

TEST_CASE("demand traces match the reference model") {
    const int universe = 41;
    auto slow = make_slow(universe);
    for (auto policy : {EvictionPolicy::lru, EvictionPolicy::fifo, EvictionPolicy::lfu}) {
        for (size_t cap : {size_t(1), size_t(2), size_t(4), size_t(8), size_t(32)}) {
            CAPTURE(policy_name(policy));
            CAPTURE(cap);
            TieredCache cache(cap, policy, slow);
            refmodel::ReferenceCache ref(ref_kind(policy), cap);
            SeededRng rng(0xC0FFEE + cap);
            for (int op = 0; op < 20000; ++op) {
                const int id = static_cast<int>(rng.next_below(universe));
                cache.get(id);
                ref.update(id);
                if (op % 1000 == 0) {
                    REQUIRE(cache.counters().hits == ref.hits);
                    REQUIRE(cache.counters().misses == ref.misses);
                    REQUIRE(cache.counters().swaps == ref.swaps);
                }
            }
            CHECK(cache.counters().hits == ref.hits);
            CHECK(cache.counters().misses == ref.misses);
            CHECK(cache.counters().swaps == ref.swaps);
            CHECK(cache.residents() == ref.sorted_items());
        }
    }
}

TEST_CASE("structural invariants under mixed random operations") {
    auto slow = make_slow(20);
    for (auto policy : {EvictionPolicy::lru, EvictionPolicy::fifo, EvictionPolicy::lfu}) {
        TieredCache cache(4, policy, slow);
        SeededRng rng(99);
        uint64_t demand_gets = 0;
        CacheCounters prev;
        for (int op = 0; op < 5000; ++op) {
            if (rng.next_below(4) == 0) {
                std::vector<int> ids;
                const int k = 1 + static_cast<int>(rng.next_below(3));
                for (int i = 0; i < k; ++i)
                    ids.push_back(static_cast<int>(rng.next_below(20)));
                cache.prefetch(ids);
            } else {
                cache.get(static_cast<int>(rng.next_below(20)));
                ++demand_gets;
            }
            const auto& c = cache.counters();
            REQUIRE(cache.size() <= cache.capacity());
            REQUIRE(c.hits + c.misses == demand_gets);
            REQUIRE(c.hits >= prev.hits);
            REQUIRE(c.misses >= prev.misses);
            REQUIRE(c.swaps >= prev.swaps);
            REQUIRE(c.prefetch_loads >= prev.prefetch_loads);
            for (int id : cache.residents())
                REQUIRE(slow->contains(id));
            prev = c;
        }
    }
}

TEST_CASE("a fast tier covering the working set stops swapping") {
    TieredCache cache(8, EvictionPolicy::lru, make_slow(6));
    SeededRng rng(7);
    for (int op = 0; op < 500; ++op)
        cache.get(static_cast<int>(rng.next_below(6)));
    CHECK(cache.counters().swaps == 0);
    CHECK(cache.counters().misses == 6);
    CHECK(cache.size() == 6);
}

TEST_CASE("peek does not disturb policy state") {
    TieredCache cache(2, EvictionPolicy::lru, make_slow(3));
    cache.get(A);
    cache.get(B);
    REQUIRE(cache.peek(A));
    CHECK(cache.peek(A)->table_id == A);
    CHECK(cache.peek(C) == nullptr);
    // A was peeked, not touched: it is still the LRU victim.
    CHECK(cache.get(C).evicted_id == A);
    const auto& counters = cache.counters();
    CHECK(counters.hits == 0);
}

TEST_CASE("policy names round-trip") {
    CHECK(parse_policy("lru") == EvictionPolicy::lru);
    CHECK(parse_policy("fifo") == EvictionPolicy::fifo);
    CHECK(parse_policy("lfu") == EvictionPolicy::lfu);
    CHECK(policy_name(EvictionPolicy::lfu) == std::string("lfu"));
    CHECK_THROWS_AS(parse_policy("mru"), Error);
}

} // TEST_SUITE
