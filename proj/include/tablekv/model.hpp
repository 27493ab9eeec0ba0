#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/rng.hpp"

namespace tablekv {

// Small deterministic prefill model used to compute and validate table KV
// blocks. Weights are fully determined by weight_seed via a counter-based
// generator, so two processes always build the same model.
struct ModelConfig {
    int num_layers = 2;
    int num_heads = 4;
    int head_dim = 16;
    int vocab_size = 0;
    double rotary_base = 10000.0;
    uint64_t weight_seed = 1;

    int hidden_dim() const { return num_heads * head_dim; }
    int ffn_dim() const { return 4 * hidden_dim(); }

    void validate() const {
        if (num_layers <= 0 || num_heads <= 0 || head_dim <= 0 || vocab_size <= 0)
            throw Error(Errc::bad_config, "model dimensions must be positive");
        if (head_dim % 2 != 0)
            throw Error(Errc::bad_config, "head_dim must be even for rotary pairs");
        if (rotary_base <= 1.0)
            throw Error(Errc::bad_config, "rotary_base must exceed 1");
    }
};

namespace weight_tag {
constexpr uint64_t embedding = 1;
constexpr uint64_t wq = 2;
constexpr uint64_t wk = 3;
constexpr uint64_t wv = 4;
constexpr uint64_t wo = 5;
constexpr uint64_t ffn_in = 6;
constexpr uint64_t ffn_out = 7;
} // namespace weight_tag

template <typename Real>
struct ModelWeights {
    struct Layer {
        std::vector<Real> wq, wk, wv, wo; // hidden x hidden, row-major [out][in]
        std::vector<Real> ffn_in;         // ffn x hidden
        std::vector<Real> ffn_out;        // hidden x ffn
    };

    std::vector<Real> embedding; // vocab x hidden
    std::vector<Layer> layers;

    static ModelWeights create(const ModelConfig& cfg) {
        cfg.validate();
        const int h = cfg.hidden_dim();
        const int f = cfg.ffn_dim();
        ModelWeights w;
        w.embedding = fill(cfg.weight_seed, weight_tag::embedding, 0,
                           static_cast<size_t>(cfg.vocab_size) * h, 0.5);
        w.layers.resize(cfg.num_layers);
        for (int l = 0; l < cfg.num_layers; ++l) {
            auto& lay = w.layers[l];
            const double proj_scale = 1.0 / std::sqrt(static_cast<double>(h));
            lay.wq = fill(cfg.weight_seed, weight_tag::wq, l, size_t(h) * h, proj_scale);
            lay.wk = fill(cfg.weight_seed, weight_tag::wk, l, size_t(h) * h, proj_scale);
            lay.wv = fill(cfg.weight_seed, weight_tag::wv, l, size_t(h) * h, proj_scale);
            lay.wo = fill(cfg.weight_seed, weight_tag::wo, l, size_t(h) * h, proj_scale);
            lay.ffn_in = fill(cfg.weight_seed, weight_tag::ffn_in, l, size_t(f) * h, proj_scale);
            lay.ffn_out = fill(cfg.weight_seed, weight_tag::ffn_out, l, size_t(h) * f,
                               1.0 / std::sqrt(static_cast<double>(f)));
        }
        return w;
    }

private:
    static std::vector<Real> fill(uint64_t seed, uint64_t tag, uint64_t layer, size_t n,
                                  double scale) {
        std::vector<Real> out(n);
        const uint64_t stream = tag * 131ull + layer;
        for (size_t i = 0; i < n; ++i)
            out[i] = static_cast<Real>(u64_to_signed_unit(mix3(seed, stream, i)) * scale);
        return out;
    }
};

} // namespace tablekv
