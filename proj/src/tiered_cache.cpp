#include "tablekv/tiered_cache.hpp"

#include <algorithm>
#include <utility>

namespace tablekv {

EvictionPolicy parse_policy(const std::string& name) {
    if (name == "lru" || name == "LRU") return EvictionPolicy::lru;
    if (name == "fifo" || name == "FIFO") return EvictionPolicy::fifo;
    if (name == "lfu" || name == "LFU") return EvictionPolicy::lfu;
    throw Error(Errc::bad_config, "unknown eviction policy '" + name + "'");
}

const char* policy_name(EvictionPolicy p) {
    switch (p) {
    case EvictionPolicy::lru: return "lru";
    case EvictionPolicy::fifo: return "fifo";
    case EvictionPolicy::lfu: return "lfu";
    }
    return "?";
}

void MemorySlowTier::put(TableKV<float> kv) {
    kv.check_shapes();
    const int id = kv.table_id;
    tables_[id] = std::make_shared<const TableKV<float>>(std::move(kv));
}

bool MemorySlowTier::contains(int table_id) const { return tables_.count(table_id) > 0; }

std::shared_ptr<const TableKV<float>> MemorySlowTier::load(int table_id) {
    auto it = tables_.find(table_id);
    if (it == tables_.end())
        throw Error(Errc::unknown_table,
                    "table " + std::to_string(table_id) + " not in slow tier");
    return it->second;
}

FileSlowTier::FileSlowTier(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
        throw Error(Errc::missing_cache_dir, "no such directory: " + dir_.string());
}

bool FileSlowTier::contains(int table_id) const {
    return std::filesystem::exists(dir_ / (std::to_string(table_id) + ".kv"));
}

std::shared_ptr<const TableKV<float>> FileSlowTier::load(int table_id) {
    const auto path = dir_ / (std::to_string(table_id) + ".kv");
    if (!std::filesystem::exists(path))
        throw Error(Errc::unknown_table,
                    "table " + std::to_string(table_id) + " has no precomputed KV file");
    auto kv = std::make_shared<TableKV<float>>(load_table_kv<float>(path.string()));
    if (kv->table_id != table_id)
        throw Error(Errc::io_error, "file " + path.string() + " holds table " +
                                        std::to_string(kv->table_id));
    return kv;
}

TieredCache::TieredCache(size_t capacity, EvictionPolicy policy, std::shared_ptr<SlowTier> slow)
    : capacity_(capacity), policy_(policy), slow_(std::move(slow)) {
    if (!slow_) throw Error(Errc::bad_config, "tiered cache needs a slow tier");
}

void TieredCache::touch(Entry& e) {
    switch (policy_) {
    case EvictionPolicy::lru:
        order_.splice(order_.begin(), order_, e.pos);
        break;
    case EvictionPolicy::fifo:
        break; // arrival order is immutable
    case EvictionPolicy::lfu:
        ++e.freq;
        e.stamp = clock_;
        break;
    }
}

int TieredCache::evict_candidate() const {
    if (capacity_ == 0 || entries_.size() < capacity_)
        throw Error(Errc::cache_not_full, "fast tier is not full");
    switch (policy_) {
    case EvictionPolicy::lru:
        return order_.back();
    case EvictionPolicy::fifo:
        return order_.front();
    case EvictionPolicy::lfu: {
        int victim = -1;
        uint64_t best_freq = 0, best_stamp = 0;
        for (const auto& [id, e] : entries_) {
            if (victim < 0 || e.freq < best_freq ||
                (e.freq == best_freq && e.stamp < best_stamp)) {
                victim = id;
                best_freq = e.freq;
                best_stamp = e.stamp;
            }
        }
        return victim;
    }
    }
    return -1;
}

int TieredCache::admit(int table_id, std::shared_ptr<const TableKV<float>> kv) {
    int evicted = -1;
    if (entries_.size() == capacity_) {
        evicted = evict_candidate();
        auto it = entries_.find(evicted);
        if (policy_ != EvictionPolicy::lfu) order_.erase(it->second.pos);
        entries_.erase(it);
        ++counters_.swaps;
    }
    Entry e;
    e.kv = std::move(kv);
    e.freq = 1;
    e.stamp = clock_;
    if (policy_ == EvictionPolicy::lru)
        e.pos = order_.insert(order_.begin(), table_id);
    else if (policy_ == EvictionPolicy::fifo)
        e.pos = order_.insert(order_.end(), table_id);
    entries_.emplace(table_id, std::move(e));
    return evicted;
}

GetResult TieredCache::get(int table_id) {
    ++clock_;
    if (auto it = entries_.find(table_id); it != entries_.end()) {
        touch(it->second);
        ++counters_.hits;
        return {it->second.kv, true, -1};
    }
    auto kv = slow_->load(table_id);
    ++counters_.misses;
    if (capacity_ == 0) return {std::move(kv), false, -1};
    const int evicted = admit(table_id, kv);
    return {std::move(kv), false, evicted};
}

std::vector<int> TieredCache::prefetch(std::span<const int> table_ids) {
    std::vector<int> admitted;
    if (capacity_ == 0) return admitted; // nothing can be retained
    for (int id : table_ids) {
        ++clock_;
        if (auto it = entries_.find(id); it != entries_.end()) {
            touch(it->second);
            continue;
        }
        auto kv = slow_->load(id);
        ++counters_.prefetch_loads;
        admit(id, std::move(kv));
        admitted.push_back(id);
    }
    return admitted;
}

bool TieredCache::resident(int table_id) const { return entries_.count(table_id) > 0; }

std::shared_ptr<const TableKV<float>> TieredCache::peek(int table_id) const {
    auto it = entries_.find(table_id);
    return it == entries_.end() ? nullptr : it->second.kv;
}

std::vector<int> TieredCache::residents() const {
    std::vector<int> out;
    out.reserve(entries_.size());
    for (const auto& [id, e] : entries_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace tablekv
