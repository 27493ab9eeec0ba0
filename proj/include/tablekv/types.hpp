#pragma once

#include <cstdint>

namespace tablekv {

using TokenId = int32_t;
using CacheHandle = uint64_t;

} // namespace tablekv
