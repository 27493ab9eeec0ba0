#pragma once

#include <string>

#include "tablekv/schema.hpp"

namespace tablekv {

// Canonical text rendering of one table: a name line, then one line per
// column with its description and key annotations. Deterministic byte-for-
// byte and newline-terminated, so renderings can be joined into prompts
// without disturbing tokenization.
std::string serialize_table(const TableSchema& schema);

} // namespace tablekv
