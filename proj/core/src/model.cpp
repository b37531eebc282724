#include "ketlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ketlab {

namespace {

struct VariantInfo {
    const char *name;
    bool lm;
};

constexpr VariantInfo kVariants[] = {
    {"transformer_causal", true},
    {"transformer_future_hint", true},
    {"gt_causal", true},
    {"gt_noncausal", true},
    {"gt_pred_next_detach", true},
    {"gt_pred_prev_causal_detach", true},
    {"ket_quad_causal", true},
    {"ket_quad_pd", true},
    {"ket_inc_causal", true},
    {"ket_inc_pd", true},
    {"topocoend_causal", true},
    {"topocoend_pd", true},
    {"tf_block", false},
    {"ket_block", false},
    {"tf_denoise", false},
    {"ket_denoise", false},
};

constexpr int kConvTaps = 3;

enum class BranchKind { none, hint, geo, ket_quad, ket_inc, topo };

struct Wiring {
    BranchKind branch = BranchKind::none;
    bool branch_noncausal = false;           // KET / topo aggregation reach
    ConvMode conv_mode = ConvMode::causal;   // geo branch
    bool carrier_values = false;             // branch consumes detached carriers
    CarrierMode carrier_mode = CarrierMode::pred_next;
};

Wiring wiring_of(VariantId v) {
    switch (v) {
        case VariantId::transformer_causal:
        case VariantId::tf_block:
        case VariantId::tf_denoise:
            return {};
        case VariantId::transformer_future_hint:
            return {BranchKind::hint, false, ConvMode::causal, false, CarrierMode::pred_next};
        case VariantId::gt_causal:
            return {BranchKind::geo, false, ConvMode::causal, false, CarrierMode::pred_next};
        case VariantId::gt_noncausal:
            return {BranchKind::geo, false, ConvMode::symmetric, false, CarrierMode::pred_next};
        case VariantId::gt_pred_next_detach:
            return {BranchKind::geo, false, ConvMode::symmetric, true, CarrierMode::pred_next};
        case VariantId::gt_pred_prev_causal_detach:
            // the t-1 shift makes the symmetric window prefix-valid
            return {BranchKind::geo, false, ConvMode::symmetric, true, CarrierMode::pred_prev};
        case VariantId::ket_quad_causal:
            return {BranchKind::ket_quad, false, ConvMode::causal, false, CarrierMode::pred_next};
        case VariantId::ket_quad_pd:
            return {BranchKind::ket_quad, true, ConvMode::causal, true, CarrierMode::pred_next};
        case VariantId::ket_inc_causal:
        case VariantId::ket_block:
        case VariantId::ket_denoise:
            return {BranchKind::ket_inc, false, ConvMode::causal, false, CarrierMode::pred_next};
        case VariantId::ket_inc_pd:
            return {BranchKind::ket_inc, true, ConvMode::causal, true, CarrierMode::pred_next};
        case VariantId::topocoend_causal:
            return {BranchKind::topo, false, ConvMode::causal, false, CarrierMode::pred_next};
        case VariantId::topocoend_pd:
            return {BranchKind::topo, true, ConvMode::causal, true, CarrierMode::pred_next};
    }
    throw std::logic_error("wiring_of: unknown variant");
}

}  // namespace

std::string to_string(VariantId v) { return kVariants[static_cast<int>(v)].name; }

std::string to_string(Regime r) {
    switch (r) {
        case Regime::C: return "C";
        case Regime::E: return "E";
        case Regime::A: return "A";
    }
    return "?";
}

std::string variant_list_string() {
    std::string out;
    for (const auto &info : kVariants) {
        if (!out.empty()) out += ", ";
        out += info.name;
    }
    return out;
}

VariantId parse_variant(const std::string &name) {
    for (int i = 0; i < static_cast<int>(std::size(kVariants)); ++i)
        if (name == kVariants[i].name) return static_cast<VariantId>(i);
    throw std::invalid_argument("unknown variant '" + name + "'; valid: " + variant_list_string());
}

const std::vector<VariantId> &lm_variants() {
    static const std::vector<VariantId> v = [] {
        std::vector<VariantId> out;
        for (int i = 0; i < static_cast<int>(std::size(kVariants)); ++i)
            if (kVariants[i].lm) out.push_back(static_cast<VariantId>(i));
        return out;
    }();
    return v;
}

const std::vector<VariantId> &block_variants() {
    static const std::vector<VariantId> v = [] {
        std::vector<VariantId> out;
        for (int i = 0; i < static_cast<int>(std::size(kVariants)); ++i)
            if (!kVariants[i].lm) out.push_back(static_cast<VariantId>(i));
        return out;
    }();
    return v;
}

bool is_lm_variant(VariantId v) { return kVariants[static_cast<int>(v)].lm; }
bool is_block_variant(VariantId v) { return !is_lm_variant(v); }

bool is_denoise_variant(VariantId v) {
    return v == VariantId::tf_denoise || v == VariantId::ket_denoise;
}

bool uses_carrier(VariantId v) {
    switch (v) {
        case VariantId::gt_pred_next_detach:
        case VariantId::gt_pred_prev_causal_detach:
        case VariantId::ket_quad_pd:
        case VariantId::ket_inc_pd:
        case VariantId::topocoend_pd:
            return true;
        default:
            return false;
    }
}

Regime regime_of(VariantId v) {
    if (!is_lm_variant(v))
        throw std::invalid_argument("regime_of: " + to_string(v) + " is a block variant; regimes cover the LM family");
    switch (v) {
        case VariantId::transformer_causal:
        case VariantId::gt_causal:
        case VariantId::gt_pred_prev_causal_detach:
        case VariantId::ket_quad_causal:
        case VariantId::ket_inc_causal:
        case VariantId::topocoend_causal:
            return Regime::C;
        case VariantId::gt_pred_next_detach:
        case VariantId::ket_quad_pd:
        case VariantId::ket_inc_pd:
        case VariantId::topocoend_pd:
            return Regime::E;
        default:
            return Regime::A;  // gt_noncausal, transformer_future_hint
    }
}

Model::Model(ModelConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg_.width < 1 || cfg_.layers < 1 || cfg_.vocab < 1)
        throw std::invalid_argument("model: width, layers and vocab must be positive");
    if (cfg_.heads < 1 || cfg_.width % cfg_.heads != 0)
        throw std::invalid_argument("model: width " + std::to_string(cfg_.width) + " not divisible by " +
                                    std::to_string(cfg_.heads) + " heads");
    if (cfg_.context < 2) throw std::invalid_argument("model: context must be >= 2");
    if (is_block_variant(cfg_.variant) && cfg_.block_size < 1)
        throw std::invalid_argument("model: block_size must be >= 1");
    build();
}

Tensor Model::add_param(const std::string &name, Shape shape, double init_bound) {
    Tensor t(std::move(shape), true);
    double *p = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = rng_.uniform(-init_bound, init_bound);
    params_.push_back(t);
    param_names_.push_back(name);
    return t;
}

Tensor Model::add_param_normal(const std::string &name, Shape shape, double stddev) {
    Tensor t(std::move(shape), true);
    double *p = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = rng_.normal(0.0, stddev);
    params_.push_back(t);
    param_names_.push_back(name);
    return t;
}

Tensor Model::add_param_const(const std::string &name, Shape shape, double value) {
    Tensor t(std::move(shape), true);
    std::fill(t.data(), t.data() + t.numel(), value);
    params_.push_back(t);
    param_names_.push_back(name);
    return t;
}

void Model::build() {
    const std::int64_t d = cfg_.width;
    const std::int64_t V = cfg_.vocab;
    const double lin = 1.0 / std::sqrt(static_cast<double>(d));
    const double lin2 = 1.0 / std::sqrt(static_cast<double>(2 * d));

    emb_ = add_param_normal("emb", {V, d}, 0.02);
    pos_ = add_param_normal("pos", {cfg_.context, d}, 0.02);

    const bool direct_block = cfg_.variant == VariantId::tf_block || cfg_.variant == VariantId::ket_block;
    if (direct_block) {
        for (int j = 0; j < cfg_.block_size; ++j)
            block_heads_.push_back(add_param("block_head." + std::to_string(j), {d, V}, lin));
    } else {
        w_out_ = add_param("w_out", {d, V}, lin);
    }
    if (is_denoise_variant(cfg_.variant))
        noise_emb_ = add_param_normal("noise_emb", {cfg_.denoise_steps, d}, 0.02);

    const Wiring w = wiring_of(cfg_.variant);
    layers_.resize(static_cast<std::size_t>(cfg_.layers));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string px = "layer." + std::to_string(l) + ".";
        auto &lp = layers_[static_cast<std::size_t>(l)];
        lp.wq = add_param(px + "attn.wq", {d, d}, lin);
        lp.wk = add_param(px + "attn.wk", {d, d}, lin);
        lp.wv = add_param(px + "attn.wv", {d, d}, lin);
        lp.wo = add_param(px + "attn.wo", {d, d}, lin);
        lp.ln1_g = add_param_const(px + "ln1.gain", {d}, 1.0);
        lp.ln1_b = add_param_const(px + "ln1.bias", {d}, 0.0);
        lp.ffn_w1 = add_param(px + "ffn.w1", {d, 2 * d}, lin);
        lp.ffn_b1 = add_param_const(px + "ffn.b1", {2 * d}, 0.0);
        lp.ffn_w2 = add_param(px + "ffn.w2", {2 * d, d}, lin2);
        lp.ffn_b2 = add_param_const(px + "ffn.b2", {d}, 0.0);
        lp.ln2_g = add_param_const(px + "ln2.gain", {d}, 1.0);
        lp.ln2_b = add_param_const(px + "ln2.bias", {d}, 0.0);
        switch (w.branch) {
            case BranchKind::none:
                break;
            case BranchKind::hint:
                lp.hint_w = add_param(px + "hint.w", {d, d}, lin);
                break;
            case BranchKind::geo:
                lp.geo.kernel = add_param(px + "geo.kernel", {kConvTaps, d},
                                          1.0 / std::sqrt(static_cast<double>(kConvTaps)));
                lp.geo.pointwise = add_param(px + "geo.pointwise", {d, d}, lin);
                break;
            case BranchKind::ket_quad:
                lp.ket.wq = add_param(px + "ket.wq", {d, d}, lin);
                lp.ket.wk = add_param(px + "ket.wk", {d, d}, lin);
                lp.ket.psi = add_param(px + "ket.psi", {2 * d, d}, lin2);
                lp.ket.mlp_w1 = add_param(px + "ket.mlp.w1", {d, 2 * d}, lin);
                lp.ket.mlp_b1 = add_param_const(px + "ket.mlp.b1", {2 * d}, 0.0);
                lp.ket.mlp_w2 = add_param(px + "ket.mlp.w2", {2 * d, d}, lin2);
                lp.ket.mlp_b2 = add_param_const(px + "ket.mlp.b2", {d}, 0.0);
                lp.ket.ln_g = add_param_const(px + "ket.ln.gain", {d}, 1.0);
                lp.ket.ln_b = add_param_const(px + "ket.ln.bias", {d}, 0.0);
                break;
            case BranchKind::ket_inc:
                lp.inc.psi = add_param(px + "inc.psi", {2 * d, d}, lin2);
                lp.inc.phi = add_param(px + "inc.phi", {d, d}, lin);
                lp.inc.ln_g = add_param_const(px + "inc.ln.gain", {d}, 1.0);
                lp.inc.ln_b = add_param_const(px + "inc.ln.bias", {d}, 0.0);
                break;
            case BranchKind::topo:
                lp.topo.pi = add_param(px + "topo.pi", {d, cfg_.topo_dim}, lin);
                lp.topo.wv = add_param(px + "topo.wv", {d, d}, lin);
                lp.topo.ln_g = add_param_const(px + "topo.ln.gain", {d}, 1.0);
                lp.topo.ln_b = add_param_const(px + "topo.ln.bias", {d}, 0.0);
                lp.topo.k = cfg_.topo_k;
                lp.topo.tau = 1.0;
                break;
        }
    }
}

std::int64_t Model::parameter_count() const {
    std::int64_t n = 0;
    for (const auto &p : params_) n += p.numel();
    return n;
}

const SimplexSet &Model::simplices_for(int len) {
    auto it = simplex_cache_.find(len);
    if (it == simplex_cache_.end()) it = simplex_cache_.emplace(len, build_edge_simplices(len)).first;
    return it->second;
}

Tensor Model::embed_window(const std::vector<int> &ids, int batch, int len, int noise_step, int block_start) const {
    const std::int64_t d = cfg_.width;
    if (len > cfg_.context)
        throw std::invalid_argument("model: window length " + std::to_string(len) + " exceeds context " +
                                    std::to_string(cfg_.context));
    std::vector<int> pos_ids(static_cast<std::size_t>(batch) * static_cast<std::size_t>(len));
    for (int b = 0; b < batch; ++b)
        for (int t = 0; t < len; ++t) pos_ids[static_cast<std::size_t>(b * len + t)] = t;
    Tensor x = add(embedding_lookup(emb_, ids), embedding_lookup(pos_, pos_ids));
    if (noise_step > 0) {
        // corrupted block rows additionally carry the schedule-step embedding
        const int block_len = len - block_start;
        Tensor zeros(Shape{block_start, d});
        const Tensor noise_rows =
            embedding_lookup(noise_emb_, std::vector<int>(static_cast<std::size_t>(block_len), noise_step - 1));
        std::vector<Tensor> parts;
        parts.reserve(static_cast<std::size_t>(2 * batch));
        for (int b = 0; b < batch; ++b) {
            parts.push_back(zeros);
            parts.push_back(noise_rows);
        }
        x = add(x, concat_rows(parts));
    }
    return x;
}

Tensor Model::run_layers(Tensor x, int batch, int len, const ForwardOptions &opts,
                         const std::vector<int> *gold_hint) {
    const Wiring w = wiring_of(cfg_.variant);
    const CarrierConfig carrier_cfg{cfg_.carrier_temp, w.carrier_mode, opts.detach_carriers};
    for (auto &lp : layers_) {
        AttentionParams attn{lp.wq, lp.wk, lp.wv, lp.wo, cfg_.heads};
        std::vector<Tensor> att_parts;
        att_parts.reserve(static_cast<std::size_t>(batch));
        for (int b = 0; b < batch; ++b)
            att_parts.push_back(causal_self_attention(slice_rows(x, b * len, (b + 1) * len), attn));
        const Tensor n1 = layer_norm(add(x, concat_rows(att_parts)), lp.ln1_g, lp.ln1_b);
        const Tensor f = add_row_vector(
            matmul(gelu(add_row_vector(matmul(n1, lp.ffn_w1), lp.ffn_b1)), lp.ffn_w2), lp.ffn_b2);

        switch (w.branch) {
            case BranchKind::none: {
                x = layer_norm(add(n1, f), lp.ln2_g, lp.ln2_b);
                break;
            }
            case BranchKind::hint: {
                x = layer_norm(add(n1, f), lp.ln2_g, lp.ln2_b);
                x = future_hint_inject(x, *gold_hint, emb_, lp.hint_w);
                break;
            }
            case BranchKind::geo: {
                std::vector<Tensor> geo_parts;
                geo_parts.reserve(static_cast<std::size_t>(batch));
                for (int b = 0; b < batch; ++b) {
                    const Tensor n1b = slice_rows(n1, b * len, (b + 1) * len);
                    const Tensor u = w.carrier_values ? predictive_carrier(n1b, w_out_, emb_, carrier_cfg) : n1b;
                    geo_parts.push_back(geo_mixer(u, w.conv_mode, lp.geo));
                }
                x = layer_norm(add(add(n1, f), concat_rows(geo_parts)), lp.ln2_g, lp.ln2_b);
                break;
            }
            case BranchKind::ket_quad:
            case BranchKind::ket_inc:
            case BranchKind::topo: {
                const Tensor h2 = layer_norm(add(n1, f), lp.ln2_g, lp.ln2_b);
                const SimplexSet *set = (w.branch == BranchKind::ket_quad) ? &simplices_for(len) : nullptr;
                std::vector<Tensor> parts;
                parts.reserve(static_cast<std::size_t>(batch));
                for (int b = 0; b < batch; ++b) {
                    const Tensor h2b = slice_rows(h2, b * len, (b + 1) * len);
                    const Tensor v = w.carrier_values ? predictive_carrier(h2b, w_out_, emb_, carrier_cfg) : h2b;
                    if (w.branch == BranchKind::ket_quad)
                        parts.push_back(ket_quadratic_block(h2b, *set, v, !w.branch_noncausal, lp.ket));
                    else if (w.branch == BranchKind::ket_inc)
                        parts.push_back(ket_incidence_block(h2b, v, w.branch_noncausal, lp.inc));
                    else
                        parts.push_back(topocoend_block(h2b, v, !w.branch_noncausal, lp.topo));
                }
                x = concat_rows(parts);
                break;
            }
        }
    }
    return x;
}

Tensor Model::forward_lm(const Batch &batch, const ForwardOptions &opts) { return forward_lm_full(batch, opts).logits; }

Model::LmOut Model::forward_lm_full(const Batch &batch, const ForwardOptions &opts) {
    if (!is_lm_variant(cfg_.variant))
        throw std::invalid_argument("forward_lm: " + to_string(cfg_.variant) + " is not an LM variant");
    const std::vector<int> *hint = opts.gold_hint;
    if (cfg_.variant == VariantId::transformer_future_hint) {
        if (!hint) throw std::invalid_argument("forward_lm: transformer_future_hint requires gold_hint");
        if (hint->size() != batch.inputs.size())
            throw std::invalid_argument("forward_lm: gold_hint must match input size");
    }
    Tensor x = embed_window(batch.inputs, batch.batch, batch.context, 0, 0);
    Tensor hidden = run_layers(std::move(x), batch.batch, batch.context, opts, hint);
    Tensor logits = matmul(hidden, w_out_);
    return {hidden, logits};
}

Tensor Model::forward_block_direct(const std::vector<int> &context_ids, int batch, int context_len) {
    if (cfg_.variant != VariantId::tf_block && cfg_.variant != VariantId::ket_block)
        throw std::invalid_argument("forward_block_direct: " + to_string(cfg_.variant) + " is not a direct block model");
    if (static_cast<int>(context_ids.size()) != batch * context_len)
        throw std::invalid_argument("forward_block_direct: context size mismatch");
    ForwardOptions opts;
    Tensor x = embed_window(context_ids, batch, context_len, 0, 0);
    Tensor hidden = run_layers(std::move(x), batch, context_len, opts, nullptr);
    // causal state at the split position, one row per sequence
    std::vector<Tensor> split_rows;
    split_rows.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b)
        split_rows.push_back(slice_rows(hidden, b * context_len + context_len - 1, b * context_len + context_len));
    const Tensor split = concat_rows(split_rows);  // batch x d
    std::vector<Tensor> head_logits;
    head_logits.reserve(block_heads_.size());
    for (const auto &head : block_heads_) head_logits.push_back(matmul(split, head));
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(batch * cfg_.block_size));
    for (int b = 0; b < batch; ++b)
        for (int j = 0; j < cfg_.block_size; ++j)
            rows.push_back(slice_rows(head_logits[static_cast<std::size_t>(j)], b, b + 1));
    return concat_rows(rows);
}

Tensor Model::forward_block_denoise(const std::vector<int> &context_ids, const std::vector<int> &corrupted,
                                    int batch, int context_len, int noise_step) {
    if (!is_denoise_variant(cfg_.variant))
        throw std::invalid_argument("forward_block_denoise: " + to_string(cfg_.variant) + " is not a denoise model");
    if (noise_step < 1 || noise_step > cfg_.denoise_steps)
        throw std::invalid_argument("forward_block_denoise: noise step " + std::to_string(noise_step) + " out of [1," +
                                    std::to_string(cfg_.denoise_steps) + "]");
    const int Bk = cfg_.block_size;
    if (static_cast<int>(context_ids.size()) != batch * context_len ||
        static_cast<int>(corrupted.size()) != batch * Bk)
        throw std::invalid_argument("forward_block_denoise: size mismatch");
    const int len = context_len + Bk;
    std::vector<int> window(static_cast<std::size_t>(batch * len));
    for (int b = 0; b < batch; ++b) {
        std::copy(context_ids.begin() + b * context_len, context_ids.begin() + (b + 1) * context_len,
                  window.begin() + b * len);
        std::copy(corrupted.begin() + b * Bk, corrupted.begin() + (b + 1) * Bk,
                  window.begin() + b * len + context_len);
    }
    ForwardOptions opts;
    Tensor x = embed_window(window, batch, len, noise_step, context_len);
    Tensor hidden = run_layers(std::move(x), batch, len, opts, nullptr);
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b)
        rows.push_back(slice_rows(hidden, b * len + context_len, b * len + context_len + Bk));
    return matmul(concat_rows(rows), w_out_);
}

Model build_model(const ModelConfig &cfg) { return Model(cfg); }

}  // namespace ketlab
