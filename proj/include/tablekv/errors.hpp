#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tablekv {

enum class Errc {
    dangling_foreign_key,
    cycle_detected,
    duplicate_table,
    empty_serialization,
    duplicate_serialization,
    unknown_table,
    cache_not_full,
    table_id_out_of_range,
    length_mismatch,
    dimension_mismatch,
    empty_group,
    missing_table_kv,
    group_order_violation,
    empty_batch,
    missing_cache_dir,
    verify_failed,
    bad_config,
    io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

// Carries the offending node sequence so callers can report which tables
// form the cycle.
class CycleError : public Error {
public:
    CycleError(std::vector<int> cycle, const std::string& msg)
        : Error(Errc::cycle_detected, msg), cycle_(std::move(cycle)) {}

    const std::vector<int>& cycle() const { return cycle_; }

private:
    std::vector<int> cycle_;
};

} // namespace tablekv
