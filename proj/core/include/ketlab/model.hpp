#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ketlab/blocks.hpp"
#include "ketlab/corpus.hpp"
#include "ketlab/rng.hpp"
#include "ketlab/tensor.hpp"

namespace ketlab {

enum class VariantId {
    transformer_causal,
    transformer_future_hint,
    gt_causal,
    gt_noncausal,
    gt_pred_next_detach,
    gt_pred_prev_causal_detach,
    ket_quad_causal,
    ket_quad_pd,
    ket_inc_causal,
    ket_inc_pd,
    topocoend_causal,
    topocoend_pd,
    tf_block,
    ket_block,
    tf_denoise,
    ket_denoise,
};

// Information regime: C strict-causal, E endogenous self-conditioning,
// A augmented-context.
enum class Regime { C, E, A };

std::string to_string(VariantId v);
std::string to_string(Regime r);
VariantId parse_variant(const std::string &name);  // lists valid names on failure
std::string variant_list_string();

const std::vector<VariantId> &lm_variants();     // the 12 language models
const std::vector<VariantId> &block_variants();  // the 4 completion models

bool is_lm_variant(VariantId v);
bool is_block_variant(VariantId v);
bool is_denoise_variant(VariantId v);
bool uses_carrier(VariantId v);

// Regime of an LM variant; block variants are rejected.
Regime regime_of(VariantId v);

struct ModelConfig {
    VariantId variant = VariantId::transformer_causal;
    int layers = 2;
    int width = 64;
    int heads = 4;
    int context = 64;
    int vocab = 0;
    int topo_k = 16;
    int topo_dim = 16;
    double carrier_temp = 1.0;
    int block_size = 4;
    int denoise_steps = 8;
    std::uint64_t seed = 7;
};

struct ForwardOptions {
    // Required for transformer_future_hint: gold next-token ids, one per
    // input position.
    const std::vector<int> *gold_hint = nullptr;
    // Cleared only by the diagnostics negative control.
    bool detach_carriers = true;
};

class Model {
public:
    explicit Model(ModelConfig cfg);

    const ModelConfig &config() const { return cfg_; }

    std::vector<Tensor> &parameters() { return params_; }
    const std::vector<std::string> &parameter_names() const { return param_names_; }
    std::int64_t parameter_count() const;

    // Next-token logits, (B*S) x V.
    Tensor forward_lm(const Batch &batch, const ForwardOptions &opts = {});

    struct LmOut {
        Tensor hidden;  // final states, (B*S) x d
        Tensor logits;
    };
    LmOut forward_lm_full(const Batch &batch, const ForwardOptions &opts = {});

    // Direct block heads read the causal state at the last context position:
    // logits (B*block_size) x V, row b*block_size + j for offset j.
    Tensor forward_block_direct(const std::vector<int> &context_ids, int batch, int context_len);

    // Denoising window [context || corrupted block] with causal attention;
    // corrupted-token embeddings carry the noise-step embedding for s, and
    // predictions are read at the block positions themselves.
    Tensor forward_block_denoise(const std::vector<int> &context_ids, const std::vector<int> &corrupted, int batch,
                                 int context_len, int noise_step);

    Tensor &embedding() { return emb_; }
    Tensor &output_head() { return w_out_; }

    Rng &rng() { return rng_; }

private:
    struct LayerParams {
        Tensor wq, wk, wv, wo;
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
        Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        // variant branch, allocated only when used
        Tensor hint_w;
        GeoMixerParams geo;
        KetQuadParams ket;
        KetIncidenceParams inc;
        TopoCoendParams topo;
    };

    Tensor add_param(const std::string &name, Shape shape, double init_bound);
    Tensor add_param_normal(const std::string &name, Shape shape, double stddev);
    Tensor add_param_const(const std::string &name, Shape shape, double value);
    void build();

    Tensor embed_window(const std::vector<int> &ids, int batch, int len, int noise_step, int block_start) const;
    Tensor run_layers(Tensor x, int batch, int len, const ForwardOptions &opts,
                      const std::vector<int> *gold_hint);
    const SimplexSet &simplices_for(int len);

    ModelConfig cfg_;
    Rng rng_;
    std::vector<Tensor> params_;
    std::vector<std::string> param_names_;

    Tensor emb_;    // V x d, reused by carriers and the hint channel
    Tensor pos_;    // context x d learned positions
    Tensor w_out_;  // d x V untied head (absent for direct block models)
    std::vector<Tensor> block_heads_;  // block_size heads of d x V
    Tensor noise_emb_;                 // denoise_steps x d

    std::vector<LayerParams> layers_;
    std::map<int, SimplexSet> simplex_cache_;
};

// Registry entry point; rejects inconsistent configs.
Model build_model(const ModelConfig &cfg);

}  // namespace ketlab
