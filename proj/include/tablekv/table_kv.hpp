#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "tablekv/errors.hpp"

namespace tablekv {

// Per-table position-free KV block. Keys are stored WITHOUT positional
// rotation; the assembly step re-rotates them at whatever global position the
// table lands on. local_offset is the table's token offset inside its joint
// encoding group (tables later in a group attended earlier ones while being
// encoded, and that influence is baked into these tensors).
template <typename Real>
struct TableKV {
    int table_id = -1;
    int token_count = 0;
    int num_layers = 0;
    int num_heads = 0;
    int head_dim = 0;
    int local_offset = 0;

    std::vector<std::vector<Real>> k; // [layer][token * heads * head_dim], unrotated
    std::vector<std::vector<Real>> v; // same shape, position-independent

    size_t per_token() const { return static_cast<size_t>(num_heads) * head_dim; }

    // Metadata-only blocks (num_layers == 0) are legal; the cache simulator
    // uses them when tensor contents are irrelevant.
    void check_shapes() const {
        if (static_cast<int>(k.size()) != num_layers || static_cast<int>(v.size()) != num_layers)
            throw Error(Errc::dimension_mismatch, "layer count mismatch in TableKV");
        const size_t expect = static_cast<size_t>(token_count) * per_token();
        for (int l = 0; l < num_layers; ++l)
            if (k[l].size() != expect || v[l].size() != expect)
                throw Error(Errc::dimension_mismatch, "tensor shape mismatch in TableKV");
    }
};

// Flat binary persistence, one file per table named "<table_id>.kv".
// Little-endian header of six u32 fields {table_id, token_count, num_layers,
// num_heads, head_dim, local_offset} followed by layer-major, token-major
// 32-bit float K data, then V data in the same layout.
namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
           static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }
inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

} // namespace detail

template <typename Real>
std::string encode_table_kv(const TableKV<Real>& kv) {
    kv.check_shapes();
    std::string out;
    const size_t elems = static_cast<size_t>(kv.num_layers) * kv.token_count * kv.per_token();
    out.reserve(24 + 8 * elems);
    detail::put_u32(out, static_cast<uint32_t>(kv.table_id));
    detail::put_u32(out, static_cast<uint32_t>(kv.token_count));
    detail::put_u32(out, static_cast<uint32_t>(kv.num_layers));
    detail::put_u32(out, static_cast<uint32_t>(kv.num_heads));
    detail::put_u32(out, static_cast<uint32_t>(kv.head_dim));
    detail::put_u32(out, static_cast<uint32_t>(kv.local_offset));
    for (const auto& layer : kv.k)
        for (Real x : layer) detail::put_f32(out, static_cast<float>(x));
    for (const auto& layer : kv.v)
        for (Real x : layer) detail::put_f32(out, static_cast<float>(x));
    return out;
}

template <typename Real>
TableKV<Real> decode_table_kv(const std::string& bytes, const std::string& origin = "<memory>") {
    if (bytes.size() < 24) throw Error(Errc::io_error, "truncated KV file: " + origin);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    TableKV<Real> kv;
    kv.table_id = static_cast<int>(detail::get_u32(p));
    kv.token_count = static_cast<int>(detail::get_u32(p + 4));
    kv.num_layers = static_cast<int>(detail::get_u32(p + 8));
    kv.num_heads = static_cast<int>(detail::get_u32(p + 12));
    kv.head_dim = static_cast<int>(detail::get_u32(p + 16));
    kv.local_offset = static_cast<int>(detail::get_u32(p + 20));

    const size_t per_layer = static_cast<size_t>(kv.token_count) * kv.per_token();
    const size_t expect = 24 + 8 * per_layer * kv.num_layers;
    if (bytes.size() != expect)
        throw Error(Errc::io_error, "KV file size mismatch: " + origin);

    const unsigned char* cur = p + 24;
    kv.k.resize(kv.num_layers);
    kv.v.resize(kv.num_layers);
    for (int l = 0; l < kv.num_layers; ++l) {
        kv.k[l].resize(per_layer);
        for (size_t i = 0; i < per_layer; ++i, cur += 4)
            kv.k[l][i] = static_cast<Real>(detail::get_f32(cur));
    }
    for (int l = 0; l < kv.num_layers; ++l) {
        kv.v[l].resize(per_layer);
        for (size_t i = 0; i < per_layer; ++i, cur += 4)
            kv.v[l][i] = static_cast<Real>(detail::get_f32(cur));
    }
    return kv;
}

template <typename Real>
void save_table_kv(const std::string& path, const TableKV<Real>& kv) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write KV file: " + path);
    const std::string bytes = encode_table_kv(kv);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_error, "short write on KV file: " + path);
}

template <typename Real>
TableKV<Real> load_table_kv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot open KV file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_table_kv<Real>(bytes, path);
}

} // namespace tablekv
