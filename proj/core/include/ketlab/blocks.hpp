#pragma once

#include <vector>

#include "ketlab/neighborhoods.hpp"
#include "ketlab/ops.hpp"
#include "ketlab/tensor.hpp"

namespace ketlab {

struct AttentionParams {
    Tensor wq, wk, wv, wo;  // each d x d
    int heads = 1;
};

// Masked multi-head self-attention over one sequence (h is S x d). Weights
// come from the softmax of scaled dot products restricted to source <=
// target; residual and norm are applied by the caller.
Tensor causal_self_attention(const Tensor &h, const AttentionParams &p);

enum class CarrierMode { pred_next, pred_prev };

struct CarrierConfig {
    double temperature = 1.0;
    CarrierMode mode = CarrierMode::pred_next;
    // Disabled only by the diagnostics negative control.
    bool detach = true;
};

// Predictive carrier rows: p = softmax(h W_out / T); row t is p_t E
// (pred_next) or p_{t-1} E with row 0 zero (pred_prev). The whole result
// passes through detach so the aggregation loss cannot reach W_out or E
// through it.
Tensor predictive_carrier(const Tensor &h, const Tensor &w_out, const Tensor &emb, const CarrierConfig &cfg);

struct GeoMixerParams {
    Tensor kernel;     // k x d depthwise taps
    Tensor pointwise;  // d x d
};

// Local geometric branch: depthwise conv over rows of u, then a pointwise
// linear map and nonlinearity. Added residually by the caller.
Tensor geo_mixer(const Tensor &u, ConvMode mode, const GeoMixerParams &p);

struct KetQuadParams {
    Tensor wq, wk;                              // d x d
    Tensor psi;                                 // 2d x d edge value map
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;      // d -> 2d -> d
    Tensor ln_g, ln_b;
};

// Global simplicial pooling: keys are W_K V(sigma) over tokens and adjacent
// edges, weights are the masked softmax of Q_t . K_sigma over the causally
// filtered simplex set (or all of it), and the output is
// LN(h_t + MLP(sum_w V(sigma))).
Tensor ket_quadratic_block(const Tensor &h, const SimplexSet &set, const Tensor &v, bool causal,
                           const KetQuadParams &p);

struct KetIncidenceParams {
    Tensor psi;  // 2d x d
    Tensor phi;  // d x d
    Tensor ln_g, ln_b;
};

// Edge-only incidence update: e_t = psi([v_{t-1}, v_t]) for t >= 1;
// m_t = phi(e_t) for t >= 1, plus phi(e_{t+1}) when noncausal and t+1 <= S-1;
// output LN(h_t + m_t).
Tensor ket_incidence_block(const Tensor &h, const Tensor &v, bool noncausal, const KetIncidenceParams &p);

struct TopoCoendParams {
    Tensor pi;  // d x topo_dim projection
    Tensor wv;  // d x d value map
    Tensor ln_g, ln_b;
    int k = 16;
    double tau = 1.0;
};

// Aggregation over the fuzzy kNN graph of z = v pi: out_t is the norm of
// h_t + sum_s w(t,s) (v_s W_V). Neighbor selection reads plain values; the
// retained weights stay differentiable through z.
Tensor topocoend_block(const Tensor &h, const Tensor &v, bool causal, const TopoCoendParams &p);

// Deliberate leakage channel: h_t + linear(E[gold_next[t]]).
Tensor future_hint_inject(const Tensor &h, const std::vector<int> &gold_next, const Tensor &emb,
                          const Tensor &hint_w);

}  // namespace ketlab
