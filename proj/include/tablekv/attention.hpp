#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "tablekv/errors.hpp"
#include "tablekv/model.hpp"
#include "tablekv/rotary.hpp"
#include "tablekv/schema.hpp"
#include "tablekv/table_kv.hpp"
#include "tablekv/types.hpp"

namespace tablekv {

// Rows tagged with this group id attend every earlier token regardless of
// block; used for user-query rows sitting after the assembled tables.
constexpr int kQueryGroup = -1;

// Block-causal attention rule: token i attends token j iff j <= i and both
// share a group (query rows see everything). Positions are the per-token
// global positions fed to the rotary transform.
struct BlockMask {
    std::vector<int> group;
    std::vector<int64_t> position;

    void append_block(int group_id, int token_count) {
        for (int t = 0; t < token_count; ++t) {
            group.push_back(group_id);
            position.push_back(static_cast<int64_t>(position.size()));
        }
    }

    bool allows(size_t i, size_t j) const {
        return j <= i && (group[i] == kQueryGroup || group[i] == group[j]);
    }

    void validate(size_t token_count) const {
        if (group.size() != token_count || position.size() != token_count)
            throw Error(Errc::dimension_mismatch, "mask does not cover all tokens");
        for (size_t i = 1; i < position.size(); ++i)
            if (position[i] <= position[i - 1])
                throw Error(Errc::dimension_mismatch, "mask positions must be strictly increasing");
    }
};

template <typename Real>
struct PrefillResult {
    std::vector<std::vector<Real>> k_raw; // [layer][token*heads*dim], before rotation
    std::vector<std::vector<Real>> k_rot; // rotated at the mask's positions
    std::vector<std::vector<Real>> v;
    std::vector<Real> hidden; // final hidden states, [token*hidden]
};

// Table KV blocks concatenated at global positions. Keys here ARE rotated;
// values are carried over unchanged. span_index partitions [0, total_tokens).
template <typename Real>
struct AssembledContext {
    struct Span {
        int table_id;
        int start;
        int end;
    };

    int total_tokens = 0;
    std::vector<std::vector<Real>> k; // [layer][token*heads*dim]
    std::vector<std::vector<Real>> v;
    std::vector<Span> span_index;
};

template <typename Real>
struct GroupTableRef {
    int table_id;
    std::span<const TokenId> tokens;
};

namespace detail {

// All reductions accumulate in double so the 32-bit mode's deviation from the
// block-masked oracle stays at storage-rounding scale.
template <typename Real>
void layer_norm(const std::vector<Real>& x, std::vector<Real>& out, int hidden) {
    const size_t tokens = x.size() / hidden;
    out.resize(x.size());
    for (size_t t = 0; t < tokens; ++t) {
        const Real* row = x.data() + t * hidden;
        Real* orow = out.data() + t * hidden;
        double mean = 0.0;
        for (int i = 0; i < hidden; ++i) mean += row[i];
        mean /= hidden;
        double var = 0.0;
        for (int i = 0; i < hidden; ++i) {
            const double d = row[i] - mean;
            var += d * d;
        }
        var /= hidden;
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        for (int i = 0; i < hidden; ++i)
            orow[i] = static_cast<Real>((row[i] - mean) * inv);
    }
}

// out[t] = W * in[t]; W is row-major [rows x cols], in is [tokens x cols].
template <typename Real>
void matmul_rows(const std::vector<Real>& w, const std::vector<Real>& in, std::vector<Real>& out,
                 int rows, int cols) {
    const size_t tokens = in.size() / cols;
    out.assign(tokens * rows, Real(0));
    for (size_t t = 0; t < tokens; ++t) {
        const Real* x = in.data() + t * cols;
        Real* y = out.data() + t * rows;
        for (int r = 0; r < rows; ++r) {
            const Real* wr = w.data() + static_cast<size_t>(r) * cols;
            double acc = 0.0;
            for (int c = 0; c < cols; ++c) acc += static_cast<double>(wr[c]) * x[c];
            y[r] = static_cast<Real>(acc);
        }
    }
}

inline double silu(double z) { return z / (1.0 + std::exp(-z)); }

// Masked multi-head attention over precomputed (rotated) K and V. Context
// rows [0, ctx) come first, then `tokens` own rows; row i of the output
// corresponds to own row i, which may attend context rows per `allows`.
template <typename Real, typename AllowFn>
void attend(const std::vector<Real>& q_rot, const std::vector<Real>& k_ctx_then_own,
            const std::vector<Real>& v_ctx_then_own, std::vector<Real>& out, size_t own_tokens,
            size_t ctx_tokens, int num_heads, int head_dim, AllowFn allows) {
    const size_t per_token = static_cast<size_t>(num_heads) * head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    out.assign(own_tokens * per_token, Real(0));

    std::vector<double> scores;
    for (size_t i = 0; i < own_tokens; ++i) {
        const size_t limit = ctx_tokens + i + 1; // causal bound over the combined row space
        for (int h = 0; h < num_heads; ++h) {
            const Real* q = q_rot.data() + i * per_token + static_cast<size_t>(h) * head_dim;
            scores.assign(limit, -1.0);
            double max_score = -1e300;
            bool any = false;
            for (size_t j = 0; j < limit; ++j) {
                if (!allows(i, j)) continue;
                const Real* k = k_ctx_then_own.data() + j * per_token +
                                static_cast<size_t>(h) * head_dim;
                double dot = 0.0;
                for (int d = 0; d < head_dim; ++d)
                    dot += static_cast<double>(q[d]) * static_cast<double>(k[d]);
                scores[j] = dot * scale;
                max_score = std::max(max_score, scores[j]);
                any = true;
            }
            if (!any) continue; // row attends nothing; output stays zero
            double denom = 0.0;
            for (size_t j = 0; j < limit; ++j) {
                if (!allows(i, j)) continue;
                scores[j] = std::exp(scores[j] - max_score);
                denom += scores[j];
            }
            Real* o = out.data() + i * per_token + static_cast<size_t>(h) * head_dim;
            for (int d = 0; d < head_dim; ++d) {
                double acc = 0.0;
                for (size_t j = 0; j < limit; ++j) {
                    if (!allows(i, j)) continue;
                    const Real* vv = v_ctx_then_own.data() + j * per_token +
                                     static_cast<size_t>(h) * head_dim;
                    acc += scores[j] * static_cast<double>(vv[d]);
                }
                o[d] = static_cast<Real>(acc / denom);
            }
        }
    }
}

template <typename Real>
void embed_tokens(const ModelConfig& cfg, const ModelWeights<Real>& w,
                  std::span<const TokenId> tokens, std::vector<Real>& x) {
    const int hidden = cfg.hidden_dim();
    x.resize(tokens.size() * hidden);
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t] < 0 || tokens[t] >= cfg.vocab_size)
            throw Error(Errc::bad_config,
                        "token id " + std::to_string(tokens[t]) + " outside vocabulary");
        const Real* row = w.embedding.data() + static_cast<size_t>(tokens[t]) * hidden;
        std::copy(row, row + hidden, x.data() + t * hidden);
    }
}

template <typename Real>
void ffn_block(const ModelConfig& cfg, const typename ModelWeights<Real>::Layer& lay,
               std::vector<Real>& x, std::vector<Real>& scratch_norm,
               std::vector<Real>& scratch_mid, std::vector<Real>& scratch_out) {
    const int hidden = cfg.hidden_dim();
    const int ffn = cfg.ffn_dim();
    layer_norm(x, scratch_norm, hidden);
    matmul_rows(lay.ffn_in, scratch_norm, scratch_mid, ffn, hidden);
    for (auto& z : scratch_mid) z = static_cast<Real>(silu(static_cast<double>(z)));
    matmul_rows(lay.ffn_out, scratch_mid, scratch_out, hidden, ffn);
    for (size_t i = 0; i < x.size(); ++i) x[i] += scratch_out[i];
}

} // namespace detail

// Full prefill honoring a block mask; the ground truth the assembly path is
// compared against. Positions come from the mask, so callers can reproduce
// any global layout.
template <typename Real>
PrefillResult<Real> prefill(const ModelConfig& cfg, const ModelWeights<Real>& w,
                            std::span<const TokenId> tokens, const BlockMask& mask) {
    cfg.validate();
    mask.validate(tokens.size());
    const int hidden = cfg.hidden_dim();
    const size_t n = tokens.size();

    PrefillResult<Real> result;
    result.k_raw.resize(cfg.num_layers);
    result.k_rot.resize(cfg.num_layers);
    result.v.resize(cfg.num_layers);

    std::vector<Real> x;
    detail::embed_tokens(cfg, w, tokens, x);

    std::vector<Real> xn, q, attn_out, proj, mid, fout;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const auto& lay = w.layers[l];
        detail::layer_norm(x, xn, hidden);
        detail::matmul_rows(lay.wq, xn, q, hidden, hidden);
        detail::matmul_rows(lay.wk, xn, result.k_raw[l], hidden, hidden);
        detail::matmul_rows(lay.wv, xn, result.v[l], hidden, hidden);

        result.k_rot[l] = rotated_copy<Real>(result.k_raw[l], mask.position, cfg.num_heads,
                                             cfg.head_dim, cfg.rotary_base);
        apply_rotation<Real>(q, mask.position, cfg.num_heads, cfg.head_dim, cfg.rotary_base);

        detail::attend<Real>(q, result.k_rot[l], result.v[l], attn_out, n, 0, cfg.num_heads,
                             cfg.head_dim, [&](size_t i, size_t j) { return mask.allows(i, j); });
        detail::matmul_rows(lay.wo, attn_out, proj, hidden, hidden);
        for (size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

        detail::ffn_block<Real>(cfg, lay, x, xn, mid, fout);
    }
    result.hidden = std::move(x);
    return result;
}

// Joint causal encoding of one group at local positions 0..L-1. The returned
// blocks hold UNROTATED keys: the local rotation applied during encoding is
// taken out again so one stored artifact serves any global offset. Tables
// later in the group attended earlier ones here, which is the cross-table
// signal solo encoding loses.
template <typename Real>
std::vector<TableKV<Real>> encode_group(const ModelConfig& cfg, const ModelWeights<Real>& w,
                                        std::span<const GroupTableRef<Real>> tables) {
    if (tables.empty()) throw Error(Errc::empty_group, "encode_group called with no tables");
    std::vector<TokenId> concat;
    for (const auto& t : tables) {
        if (t.tokens.empty())
            throw Error(Errc::empty_group,
                        "table " + std::to_string(t.table_id) + " has no tokens");
        concat.insert(concat.end(), t.tokens.begin(), t.tokens.end());
    }

    BlockMask mask;
    mask.append_block(0, static_cast<int>(concat.size()));
    auto full = prefill<Real>(cfg, w, concat, mask);

    std::vector<TableKV<Real>> out;
    out.reserve(tables.size());
    const size_t per_token = static_cast<size_t>(cfg.num_heads) * cfg.head_dim;
    size_t offset = 0;
    for (const auto& t : tables) {
        TableKV<Real> kv;
        kv.table_id = t.table_id;
        kv.token_count = static_cast<int>(t.tokens.size());
        kv.num_layers = cfg.num_layers;
        kv.num_heads = cfg.num_heads;
        kv.head_dim = cfg.head_dim;
        kv.local_offset = static_cast<int>(offset);
        kv.k.resize(cfg.num_layers);
        kv.v.resize(cfg.num_layers);
        for (int l = 0; l < cfg.num_layers; ++l) {
            const Real* kbase = full.k_raw[l].data() + offset * per_token;
            const Real* vbase = full.v[l].data() + offset * per_token;
            kv.k[l].assign(kbase, kbase + t.tokens.size() * per_token);
            kv.v[l].assign(vbase, vbase + t.tokens.size() * per_token);
        }
        out.push_back(std::move(kv));
        offset += t.tokens.size();
    }
    return out;
}

// Concatenates stored blocks in the requested table order, assigning global
// positions 0..total-1 and rotating keys accordingly. Tables of one group
// must appear in their group-relative order (ascending local offset), else
// the relative positions baked into their tensors would be contradicted.
template <typename Real>
AssembledContext<Real> assemble(const ModelConfig& cfg, const EncodingPlan& plan,
                                std::span<const TableKV<Real>> table_kvs,
                                std::span<const int> order) {
    std::unordered_map<int, const TableKV<Real>*> by_id;
    for (const auto& kv : table_kvs) by_id[kv.table_id] = &kv;

    std::unordered_map<int, int> last_offset_in_group;
    std::vector<const TableKV<Real>*> picked;
    picked.reserve(order.size());
    int total = 0;
    for (int id : order) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw Error(Errc::missing_table_kv,
                        "no precomputed KV for table " + std::to_string(id));
        const TableKV<Real>* kv = it->second;
        if (kv->num_layers != cfg.num_layers || kv->num_heads != cfg.num_heads ||
            kv->head_dim != cfg.head_dim)
            throw Error(Errc::dimension_mismatch,
                        "KV block shape does not match model config for table " +
                            std::to_string(id));
        if (id < 0 || id >= static_cast<int>(plan.group_of.size()))
            throw Error(Errc::bad_config, "table " + std::to_string(id) + " not in plan");
        const int g = plan.group_of[id];
        auto [pos, inserted] = last_offset_in_group.try_emplace(g, kv->local_offset);
        if (!inserted) {
            if (kv->local_offset <= pos->second)
                throw Error(Errc::group_order_violation,
                            "table " + std::to_string(id) +
                                " appears out of group-relative order in the assembly");
            pos->second = kv->local_offset;
        }
        picked.push_back(kv);
        total += kv->token_count;
    }

    AssembledContext<Real> ctx;
    ctx.total_tokens = total;
    ctx.k.assign(cfg.num_layers, {});
    ctx.v.assign(cfg.num_layers, {});
    const size_t per_token = static_cast<size_t>(cfg.num_heads) * cfg.head_dim;
    for (int l = 0; l < cfg.num_layers; ++l) {
        ctx.k[l].reserve(static_cast<size_t>(total) * per_token);
        ctx.v[l].reserve(static_cast<size_t>(total) * per_token);
    }

    int cursor = 0;
    std::vector<int64_t> positions;
    for (const TableKV<Real>* kv : picked) {
        positions.resize(kv->token_count);
        for (int t = 0; t < kv->token_count; ++t) positions[t] = cursor + t;
        for (int l = 0; l < cfg.num_layers; ++l) {
            auto rotated = rotated_copy<Real>(kv->k[l], positions, cfg.num_heads, cfg.head_dim,
                                              cfg.rotary_base);
            ctx.k[l].insert(ctx.k[l].end(), rotated.begin(), rotated.end());
            ctx.v[l].insert(ctx.v[l].end(), kv->v[l].begin(), kv->v[l].end());
        }
        ctx.span_index.push_back({kv->table_id, cursor, cursor + kv->token_count});
        cursor += kv->token_count;
    }
    return ctx;
}

// Prefill of the user-query tokens against an assembled context. Query rows
// attend every assembled table token plus each other causally; only the
// query's own projections are computed, which is where the serving win
// comes from.
template <typename Real>
std::vector<Real> query_attend(const ModelConfig& cfg, const ModelWeights<Real>& w,
                               const AssembledContext<Real>& ctx,
                               std::span<const TokenId> query_tokens) {
    cfg.validate();
    const int hidden = cfg.hidden_dim();
    const size_t nq = query_tokens.size();
    const size_t nctx = static_cast<size_t>(ctx.total_tokens);
    const size_t per_token = static_cast<size_t>(cfg.num_heads) * cfg.head_dim;

    std::vector<Real> x;
    detail::embed_tokens(cfg, w, query_tokens, x);

    std::vector<int64_t> positions(nq);
    for (size_t i = 0; i < nq; ++i) positions[i] = static_cast<int64_t>(nctx + i);

    std::vector<Real> xn, q, k_own, v_own, combined_k, combined_v, attn_out, proj, mid, fout;
    for (int l = 0; l < cfg.num_layers; ++l) {
        const auto& lay = w.layers[l];
        detail::layer_norm(x, xn, hidden);
        detail::matmul_rows(lay.wq, xn, q, hidden, hidden);
        detail::matmul_rows(lay.wk, xn, k_own, hidden, hidden);
        detail::matmul_rows(lay.wv, xn, v_own, hidden, hidden);
        apply_rotation<Real>(q, positions, cfg.num_heads, cfg.head_dim, cfg.rotary_base);
        apply_rotation<Real>(k_own, positions, cfg.num_heads, cfg.head_dim, cfg.rotary_base);

        if (nctx > 0) {
            if (ctx.k[l].size() != nctx * per_token)
                throw Error(Errc::dimension_mismatch, "assembled context shape mismatch");
            combined_k.assign(ctx.k[l].begin(), ctx.k[l].end());
            combined_k.insert(combined_k.end(), k_own.begin(), k_own.end());
            combined_v.assign(ctx.v[l].begin(), ctx.v[l].end());
            combined_v.insert(combined_v.end(), v_own.begin(), v_own.end());
        } else {
            combined_k = k_own;
            combined_v = v_own;
        }

        detail::attend<Real>(q, combined_k, combined_v, attn_out, nq, nctx, cfg.num_heads,
                             cfg.head_dim, [&](size_t, size_t) { return true; });
        detail::matmul_rows(lay.wo, attn_out, proj, hidden, hidden);
        for (size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

        detail::ffn_block<Real>(cfg, lay, x, xn, mid, fout);
    }
    return x;
}

} // namespace tablekv
