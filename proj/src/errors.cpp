#include "tablekv/errors.hpp"

namespace tablekv {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::dangling_foreign_key: return "DanglingForeignKey";
    case Errc::cycle_detected: return "CycleDetected";
    case Errc::duplicate_table: return "DuplicateTable";
    case Errc::empty_serialization: return "EmptySerialization";
    case Errc::duplicate_serialization: return "DuplicateSerialization";
    case Errc::unknown_table: return "UnknownTable";
    case Errc::cache_not_full: return "CacheNotFull";
    case Errc::table_id_out_of_range: return "TableIdOutOfRange";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_group: return "EmptyGroup";
    case Errc::missing_table_kv: return "MissingTableKV";
    case Errc::group_order_violation: return "GroupOrderViolation";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::missing_cache_dir: return "MissingCacheDir";
    case Errc::verify_failed: return "VerifyFailed";
    case Errc::bad_config: return "BadConfig";
    case Errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace tablekv
