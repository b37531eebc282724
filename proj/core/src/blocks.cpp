#include "ketlab/blocks.hpp"

#include <cmath>
#include <stdexcept>

namespace ketlab {

Tensor causal_self_attention(const Tensor &h, const AttentionParams &p) {
    const std::int64_t S = h.rows(), d = h.cols();
    if (p.heads < 1 || d % p.heads != 0)
        throw std::invalid_argument("causal_self_attention: width " + std::to_string(d) + " not divisible by " +
                                    std::to_string(p.heads) + " heads");
    const std::int64_t dh = d / p.heads;
    const auto mask = causal_mask(static_cast<int>(S));
    const Tensor q = matmul(h, p.wq);
    const Tensor k = matmul(h, p.wk);
    const Tensor v = matmul(h, p.wv);
    std::vector<Tensor> ctx;
    ctx.reserve(static_cast<std::size_t>(p.heads));
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int head = 0; head < p.heads; ++head) {
        const std::int64_t c0 = head * dh, c1 = (head + 1) * dh;
        const Tensor qh = slice_cols(q, c0, c1);
        const Tensor kh = slice_cols(k, c0, c1);
        const Tensor vh = slice_cols(v, c0, c1);
        const Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        const Tensor w = masked_softmax(scores, mask);
        ctx.push_back(matmul(w, vh));
    }
    const Tensor merged = (ctx.size() == 1) ? ctx[0] : concat_cols(ctx);
    return matmul(merged, p.wo);
}

Tensor predictive_carrier(const Tensor &h, const Tensor &w_out, const Tensor &emb, const CarrierConfig &cfg) {
    if (cfg.temperature <= 0.0) throw std::invalid_argument("predictive_carrier: temperature must be positive");
    const Tensor logits = scale(matmul(h, w_out), 1.0 / cfg.temperature);
    const Tensor probs = softmax(logits);
    Tensor carrier = matmul(probs, emb);
    if (cfg.mode == CarrierMode::pred_prev) carrier = shift_rows_down(carrier);
    return cfg.detach ? detach(carrier) : carrier;
}

Tensor geo_mixer(const Tensor &u, ConvMode mode, const GeoMixerParams &p) {
    return gelu(matmul(depthwise_conv1d(u, p.kernel, mode), p.pointwise));
}

namespace {

Tensor ket_mlp(const Tensor &x, const KetQuadParams &p) {
    const Tensor hidden = gelu(add_row_vector(matmul(x, p.mlp_w1), p.mlp_b1));
    return add_row_vector(matmul(hidden, p.mlp_w2), p.mlp_b2);
}

// Rows 0..S-1 are token values v_t; rows S..2S-2 are edge values
// psi([v_{e}, v_{e+1}]) for edges (e, e+1), matching build_edge_simplices
// index order.
Tensor simplex_values(const Tensor &v, const Tensor &psi) {
    const std::int64_t S = v.rows();
    const Tensor pairs = concat_cols({shift_rows_down(v), v});  // row t = [v_{t-1}, v_t]
    const Tensor edges_all = matmul(pairs, psi);
    if (S == 1) return v;
    return concat_rows({v, slice_rows(edges_all, 1, S)});
}

}  // namespace

Tensor ket_quadratic_block(const Tensor &h, const SimplexSet &set, const Tensor &v, bool causal,
                           const KetQuadParams &p) {
    const std::int64_t S = h.rows();
    if (set.length != static_cast<int>(S))
        throw std::invalid_argument("ket_quadratic_block: simplex set built for S=" + std::to_string(set.length) +
                                    ", got " + std::to_string(S));
    const std::int64_t count = static_cast<std::int64_t>(set.size());
    const Tensor values = simplex_values(v, p.psi);  // count x d
    const Tensor keys = matmul(values, p.wk);
    const Tensor queries = matmul(h, p.wq);
    const Tensor scores = matmul(queries, transpose(keys));  // S x count

    std::vector<std::uint8_t> mask(static_cast<std::size_t>(S * count), 1);
    if (causal) {
        for (std::int64_t t = 0; t < S; ++t)
            for (std::int64_t i = 0; i < count; ++i)
                mask[static_cast<std::size_t>(t * count + i)] =
                    set.simplices[static_cast<std::size_t>(i)].max_vertex() <= t ? 1 : 0;
    }
    const Tensor w = masked_softmax(scores, mask);
    const Tensor mixed = matmul(w, values);
    return layer_norm(add(h, ket_mlp(mixed, p)), p.ln_g, p.ln_b);
}

Tensor ket_incidence_block(const Tensor &h, const Tensor &v, bool noncausal, const KetIncidenceParams &p) {
    const std::int64_t S = h.rows(), d = h.cols();
    const Tensor pairs = concat_cols({shift_rows_down(v), v});
    const Tensor edges = matmul(pairs, p.psi);  // row t = e_t, row 0 invalid
    const Tensor messages = matmul(edges, p.phi);
    // zero out the t = 0 row, where no incident edge exists yet
    Tensor guard(Shape{S, d});
    std::fill(guard.data() + d, guard.data() + S * d, 1.0);
    Tensor m = mul(messages, guard);
    if (noncausal && S > 1) m = add(m, shift_rows_up(messages));
    return layer_norm(add(h, m), p.ln_g, p.ln_b);
}

Tensor topocoend_block(const Tensor &h, const Tensor &v, bool causal, const TopoCoendParams &p) {
    const std::int64_t S = h.rows();
    const Tensor z = matmul(v, p.pi);
    // neighbor selection is discrete and reads plain values; the weights on
    // the retained set stay differentiable through z
    const KnnGraph graph = build_fuzzy_knn(z, std::min<int>(p.k, static_cast<int>(S)), p.tau, causal);
    const auto mask = knn_mask(graph, static_cast<int>(S));
    const Tensor dist = pairwise_sqdist(z);
    const Tensor w = masked_softmax(scale(dist, -1.0 / p.tau), mask);
    const Tensor mixed = matmul(w, matmul(v, p.wv));
    return layer_norm(add(h, mixed), p.ln_g, p.ln_b);
}

Tensor future_hint_inject(const Tensor &h, const std::vector<int> &gold_next, const Tensor &emb,
                          const Tensor &hint_w) {
    if (static_cast<std::int64_t>(gold_next.size()) != h.rows())
        throw std::invalid_argument("future_hint_inject: need one gold id per row");
    const Tensor gold_rows = embedding_lookup(emb, gold_next);
    return add(h, matmul(gold_rows, hint_w));
}

}  // namespace ketlab
