#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tablekv/errors.hpp"

namespace tablekv {

// Standard rotary transform over adjacent dimension pairs: pair k of a head
// rotates by angle position * base^(-2k/head_dim). Position 0 is the
// identity; negative positions invert the rotation. Attention scores between
// rotated queries and keys depend only on the position difference, which is
// what makes stored-unrotated KV blocks relocatable.
//
// Layout: data is [token][head][dim], positions has one entry per token.
// Trigonometry runs in double regardless of Real so that the 32-bit mode's
// error stays at storage-rounding level.
template <typename Real>
void apply_rotation(std::span<Real> data, std::span<const int64_t> positions, int num_heads,
                    int head_dim, double rotary_base) {
    if (head_dim % 2 != 0)
        throw Error(Errc::dimension_mismatch, "head_dim must be even");
    const size_t per_token = static_cast<size_t>(num_heads) * head_dim;
    if (per_token == 0 || data.size() != positions.size() * per_token)
        throw Error(Errc::dimension_mismatch,
                    "rotation tensor size does not match positions * heads * head_dim");

    std::vector<double> inv_freq(head_dim / 2);
    for (int k = 0; k < head_dim / 2; ++k)
        inv_freq[k] = std::pow(rotary_base, -2.0 * k / head_dim);

    for (size_t t = 0; t < positions.size(); ++t) {
        const double pos = static_cast<double>(positions[t]);
        Real* token = data.data() + t * per_token;
        for (int k = 0; k < head_dim / 2; ++k) {
            const double angle = pos * inv_freq[k];
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            for (int h = 0; h < num_heads; ++h) {
                Real* p = token + static_cast<size_t>(h) * head_dim + 2 * k;
                const double a = p[0];
                const double b = p[1];
                p[0] = static_cast<Real>(a * c - b * s);
                p[1] = static_cast<Real>(a * s + b * c);
            }
        }
    }
}

template <typename Real>
std::vector<Real> rotated_copy(std::span<const Real> data, std::span<const int64_t> positions,
                               int num_heads, int head_dim, double rotary_base) {
    std::vector<Real> out(data.begin(), data.end());
    apply_rotation<Real>(out, positions, num_heads, head_dim, rotary_base);
    return out;
}

} // namespace tablekv
