#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/rng.hpp"
#include "tablekv/table_kv.hpp"

using namespace tablekv;

namespace {

TableKV<float> sample_kv(uint64_t seed) {
    TableKV<float> kv;
    kv.table_id = 42;
    kv.token_count = 3;
    kv.num_layers = 2;
    kv.num_heads = 2;
    kv.head_dim = 4;
    kv.local_offset = 5;
    SeededRng rng(seed);
    const size_t per_layer = static_cast<size_t>(kv.token_count) * kv.per_token();
    kv.k.resize(kv.num_layers);
    kv.v.resize(kv.num_layers);
    for (int l = 0; l < kv.num_layers; ++l) {
        for (size_t i = 0; i < per_layer; ++i) {
            kv.k[l].push_back(static_cast<float>(u64_to_signed_unit(rng.next_u64())));
            kv.v[l].push_back(static_cast<float>(u64_to_signed_unit(rng.next_u64())));
        }
    }
    return kv;
}

uint32_t read_u32_le(const std::string& bytes, size_t offset) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
    return v;
}

} // namespace

TEST_SUITE("table-kv-format") {

TEST_CASE("encode/decode round-trips every field and tensor") {
    const auto kv = sample_kv(1);
    const auto bytes = encode_table_kv(kv);
    const auto back = decode_table_kv<float>(bytes);

    CHECK(back.table_id == kv.table_id);
    CHECK(back.token_count == kv.token_count);
    CHECK(back.num_layers == kv.num_layers);
    CHECK(back.num_heads == kv.num_heads);
    CHECK(back.head_dim == kv.head_dim);
    CHECK(back.local_offset == kv.local_offset);
    CHECK(back.k == kv.k);
    CHECK(back.v == kv.v);

    CHECK(encode_table_kv(back) == bytes);
}

TEST_CASE("header is six little-endian u32 fields followed by f32 data") {
    const auto kv = sample_kv(2);
    const auto bytes = encode_table_kv(kv);

    const size_t per_layer = static_cast<size_t>(kv.token_count) * kv.per_token();
    CHECK(bytes.size() == 24 + 8 * per_layer * kv.num_layers);
    CHECK(read_u32_le(bytes, 0) == 42);
    CHECK(read_u32_le(bytes, 4) == 3);
    CHECK(read_u32_le(bytes, 8) == 2);
    CHECK(read_u32_le(bytes, 12) == 2);
    CHECK(read_u32_le(bytes, 16) == 4);
    CHECK(read_u32_le(bytes, 20) == 5);

    // Layer-major, token-major K first, then V in the same layout.
    const uint32_t first_k = read_u32_le(bytes, 24);
    float f;
    static_assert(sizeof(f) == 4);
    std::memcpy(&f, &first_k, 4);
    CHECK(f == kv.k[0][0]);

    const size_t v_start = 24 + 4 * per_layer * kv.num_layers;
    const uint32_t first_v = read_u32_le(bytes, v_start);
    std::memcpy(&f, &first_v, 4);
    CHECK(f == kv.v[0][0]);
}

TEST_CASE("truncated or padded input is an IoError") {
    const auto kv = sample_kv(3);
    const auto bytes = encode_table_kv(kv);

    for (const std::string mutated :
         {std::string(), bytes.substr(0, 10), bytes.substr(0, bytes.size() - 1),
          bytes + std::string(1, '\0')}) {
        try {
            decode_table_kv<float>(mutated, "mutated");
            FAIL("expected IoError");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::io_error);
        }
    }
}

TEST_CASE("metadata-only blocks are legal") {
    TableKV<float> kv;
    kv.table_id = 7;
    kv.token_count = 120;
    kv.num_layers = 0;
    kv.num_heads = 4;
    kv.head_dim = 16;
    kv.local_offset = 30;
    CHECK_NOTHROW(kv.check_shapes());

    const auto bytes = encode_table_kv(kv);
    CHECK(bytes.size() == 24);
    const auto back = decode_table_kv<float>(bytes);
    CHECK(back.token_count == 120);
    CHECK(back.local_offset == 30);
    CHECK(back.k.empty());
}

TEST_CASE("shape checks reject inconsistent tensors") {
    auto kv = sample_kv(4);
    kv.k[1].pop_back();
    CHECK_THROWS_AS(encode_table_kv(kv), Error);

    auto kv2 = sample_kv(5);
    kv2.v.pop_back();
    CHECK_THROWS_AS(kv2.check_shapes(), Error);
}

TEST_CASE("file save/load round-trip and error paths") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tablekv_format_test";
    fs::create_directories(dir);
    const std::string path = (dir / "42.kv").string();

    const auto kv = sample_kv(6);
    save_table_kv(path, kv);
    const auto back = load_table_kv<float>(path);
    CHECK(back.k == kv.k);
    CHECK(back.v == kv.v);
    CHECK(back.table_id == kv.table_id);

    // Double precision loads of an f32 file widen without surprises.
    const auto wide = load_table_kv<double>(path);
    CHECK(wide.k[0][0] == static_cast<double>(kv.k[0][0]));

    CHECK_THROWS_AS(load_table_kv<float>((dir / "missing.kv").string()), Error);

    fs::resize_file(path, 30);
    CHECK_THROWS_AS(load_table_kv<float>(path), Error);

    fs::remove_all(dir);
}

} // TEST_SUITE
