#include "tablekv/serialize.hpp"

namespace tablekv {

std::string serialize_table(const TableSchema& schema) {
    std::string out = "table " + schema.name + "\n";
    for (const auto& col : schema.columns) {
        out += "col " + col.name;
        if (!col.description.empty()) out += ": " + col.description;
        if (col.is_primary_key) out += " [pk]";
        for (const auto& fk : schema.foreign_keys) {
            if (fk.column == col.name)
                out += " [fk #" + std::to_string(fk.ref_table) + "." + fk.ref_column + "]";
        }
        out += "\n";
    }
    return out;
}

} // namespace tablekv
