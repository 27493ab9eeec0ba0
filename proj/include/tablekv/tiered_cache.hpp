#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/table_kv.hpp"

namespace tablekv {

enum class EvictionPolicy { lru, fifo, lfu };

EvictionPolicy parse_policy(const std::string& name);
const char* policy_name(EvictionPolicy p);

// Backing store holding every precomputed table. Lookups of unknown ids
// throw UnknownTable.
class SlowTier {
public:
    virtual ~SlowTier() = default;
    virtual bool contains(int table_id) const = 0;
    virtual std::shared_ptr<const TableKV<float>> load(int table_id) = 0;
};

class MemorySlowTier : public SlowTier {
public:
    void put(TableKV<float> kv);
    bool contains(int table_id) const override;
    std::shared_ptr<const TableKV<float>> load(int table_id) override;

private:
    std::unordered_map<int, std::shared_ptr<const TableKV<float>>> tables_;
};

// Reads <table_id>.kv files from a precompute directory on demand.
class FileSlowTier : public SlowTier {
public:
    explicit FileSlowTier(std::filesystem::path dir);
    bool contains(int table_id) const override;
    std::shared_ptr<const TableKV<float>> load(int table_id) override;

private:
    std::filesystem::path dir_;
};

struct CacheCounters {
    uint64_t hits = 0;
    uint64_t misses = 0;
    uint64_t swaps = 0;
    uint64_t prefetch_loads = 0;
};

struct GetResult {
    std::shared_ptr<const TableKV<float>> kv;
    bool hit = false;
    int evicted_id = -1; // -1 when nothing was displaced
};

// Fast tier of at most `capacity` whole tables in front of the slow tier.
// Capacity 0 degenerates to load-through with no retention, which is the
// no-cache-management ablation. All mutations are serialized by the caller;
// there is no internal locking.
class TieredCache {
public:
    TieredCache(size_t capacity, EvictionPolicy policy, std::shared_ptr<SlowTier> slow);

    GetResult get(int table_id);

    // Demand-load semantics per id, counted under prefetch_loads instead of
    // misses; resident ids only have their recency refreshed. Returns the ids
    // actually admitted.
    std::vector<int> prefetch(std::span<const int> table_ids);

    // Which table the policy would drop next. Only meaningful when the fast
    // tier is at capacity; otherwise throws CacheNotFull.
    int evict_candidate() const;

    bool resident(int table_id) const;

    // Resident entry without any policy side effect; nullptr when absent.
    std::shared_ptr<const TableKV<float>> peek(int table_id) const;

    size_t size() const { return entries_.size(); }
    size_t capacity() const { return capacity_; }
    EvictionPolicy policy() const { return policy_; }
    const CacheCounters& counters() const { return counters_; }
    std::vector<int> residents() const; // sorted snapshot

private:
    struct Entry {
        std::shared_ptr<const TableKV<float>> kv;
        uint64_t freq = 0;
        uint64_t stamp = 0;
        std::list<int>::iterator pos; // LRU recency / FIFO arrival slot
    };

    void touch(Entry& e);
    int admit(int table_id, std::shared_ptr<const TableKV<float>> kv); // returns evicted id or -1

    size_t capacity_;
    EvictionPolicy policy_;
    std::shared_ptr<SlowTier> slow_;
    std::unordered_map<int, Entry> entries_;
    std::list<int> order_; // LRU: front = most recent; FIFO: front = oldest
    uint64_t clock_ = 0;
    CacheCounters counters_;
};

} // namespace tablekv
