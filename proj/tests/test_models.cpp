// Variant registry, regime mapping, model assembly, and the checkpoint
// format.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>

#include "doctest.h"
#include "ketlab/checkpoint.hpp"
#include "ketlab/corpus.hpp"
#include "ketlab/model.hpp"
#include "ketlab/ops.hpp"

using namespace ketlab;

namespace {

ModelConfig tiny_config(VariantId v, int seed = 7) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.layers = 2;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.context = 6;
    cfg.vocab = 11;
    cfg.block_size = 2;
    cfg.seed = static_cast<std::uint64_t>(seed);
    return cfg;
}

Batch tiny_batch(int B, int S, int vocab, int seed = 3) {
    Rng rng(static_cast<std::uint64_t>(seed));
    Batch b;
    b.batch = B;
    b.context = S;
    for (int i = 0; i < B * S; ++i) {
        b.inputs.push_back(static_cast<int>(rng.index(vocab)));
        b.targets.push_back(static_cast<int>(rng.index(vocab)));
    }
    return b;
}

}  // namespace

TEST_CASE("registry holds 12 LM variants and 4 block variants") {
    CHECK(lm_variants().size() == 12);
    CHECK(block_variants().size() == 4);
    for (VariantId v : lm_variants()) CHECK(parse_variant(to_string(v)) == v);
}

TEST_CASE("parse_variant lists valid names on failure") {
    CHECK_THROWS_WITH_AS(parse_variant("bogus"), doctest::Contains("transformer_causal"), std::invalid_argument);
}

TEST_CASE("regime mapping matches the published table") {
    CHECK(regime_of(VariantId::transformer_causal) == Regime::C);
    CHECK(regime_of(VariantId::gt_causal) == Regime::C);
    CHECK(regime_of(VariantId::gt_pred_prev_causal_detach) == Regime::C);
    CHECK(regime_of(VariantId::ket_quad_causal) == Regime::C);
    CHECK(regime_of(VariantId::ket_inc_causal) == Regime::C);
    CHECK(regime_of(VariantId::topocoend_causal) == Regime::C);
    CHECK(regime_of(VariantId::gt_pred_next_detach) == Regime::E);
    CHECK(regime_of(VariantId::ket_quad_pd) == Regime::E);
    CHECK(regime_of(VariantId::ket_inc_pd) == Regime::E);
    CHECK(regime_of(VariantId::topocoend_pd) == Regime::E);
    CHECK(regime_of(VariantId::gt_noncausal) == Regime::A);
    CHECK(regime_of(VariantId::transformer_future_hint) == Regime::A);
    CHECK_THROWS_AS(regime_of(VariantId::tf_block), std::invalid_argument);
}

TEST_CASE("carrier-bearing variants are exactly the five detached ones") {
    int carriers = 0;
    for (VariantId v : lm_variants())
        if (uses_carrier(v)) ++carriers;
    CHECK(carriers == 5);
    CHECK(uses_carrier(VariantId::gt_pred_next_detach));
    CHECK(uses_carrier(VariantId::gt_pred_prev_causal_detach));
    CHECK(uses_carrier(VariantId::ket_quad_pd));
    CHECK(uses_carrier(VariantId::ket_inc_pd));
    CHECK(uses_carrier(VariantId::topocoend_pd));
    CHECK_FALSE(uses_carrier(VariantId::transformer_future_hint));
}

TEST_CASE("build_model is a pure function of config and seed") {
    Model a(tiny_config(VariantId::ket_quad_pd));
    Model b(tiny_config(VariantId::ket_quad_pd));
    CHECK(a.parameter_count() == b.parameter_count());
    REQUIRE(a.parameters().size() == b.parameters().size());
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        const auto &pa = a.parameters()[i].values();
        const auto &pb = b.parameters()[i].values();
        CHECK(std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0);
    }
    Model c(tiny_config(VariantId::ket_quad_pd, 8));
    bool any_diff = false;
    for (std::size_t i = 0; i < a.parameters().size() && !any_diff; ++i)
        if (a.parameters()[i].values() != c.parameters()[i].values()) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("transformer_causal has no variant-branch parameters") {
    Model plain(tiny_config(VariantId::transformer_causal));
    for (const auto &name : plain.parameter_names()) {
        CHECK(name.find("geo") == std::string::npos);
        CHECK(name.find("ket") == std::string::npos);
        CHECK(name.find("inc") == std::string::npos);
        CHECK(name.find("topo") == std::string::npos);
        CHECK(name.find("hint") == std::string::npos);
    }
}

TEST_CASE("ket_quad_causal has more parameters than transformer_causal") {
    Model plain(tiny_config(VariantId::transformer_causal));
    Model quad(tiny_config(VariantId::ket_quad_causal));
    const std::int64_t d = 8;
    // extra per layer: wq, wk (d*d each), psi (2d*d), MLP (d*2d + 2d + 2d*d + d), LN (2d)
    const std::int64_t extra_per_layer = d * d + d * d + 2 * d * d + (2 * d * d + 2 * d + 2 * d * d + d) + 2 * d;
    CHECK(quad.parameter_count() == plain.parameter_count() + 2 * extra_per_layer);
}

TEST_CASE("forward_lm produces finite logits of shape (B*S) x V") {
    for (VariantId v : lm_variants()) {
        CAPTURE(to_string(v));
        Model model(tiny_config(v));
        const Batch b = tiny_batch(2, 6, 11);
        ForwardOptions opts;
        if (v == VariantId::transformer_future_hint) opts.gold_hint = &b.targets;
        const Tensor logits = model.forward_lm(b, opts);
        CHECK(logits.rows() == 12);
        CHECK(logits.cols() == 11);
        for (std::int64_t i = 0; i < logits.numel(); ++i) CHECK(std::isfinite(logits.data()[i]));
    }
}

TEST_CASE("forward_lm B=1,S=2 output shape is 2 x V") {
    ModelConfig cfg = tiny_config(VariantId::transformer_causal);
    cfg.context = 2;
    Model model(cfg);
    Batch b;
    b.batch = 1;
    b.context = 2;
    b.inputs = {1, 2};
    b.targets = {2, 3};
    const Tensor logits = model.forward_lm(b);
    CHECK(logits.rows() == 2);
    CHECK(logits.cols() == 11);
}

TEST_CASE("future hint variant rejects a missing hint") {
    Model model(tiny_config(VariantId::transformer_future_hint));
    const Batch b = tiny_batch(1, 6, 11);
    CHECK_THROWS_AS(model.forward_lm(b, {}), std::invalid_argument);
}

TEST_CASE("two identical forwards are bit-identical") {
    Model model(tiny_config(VariantId::topocoend_pd));
    const Batch b = tiny_batch(2, 6, 11);
    const Tensor l1 = model.forward_lm(b);
    const Tensor l2 = model.forward_lm(b);
    CHECK(std::memcmp(l1.data(), l2.data(), static_cast<std::size_t>(l1.numel()) * sizeof(double)) == 0);
}

TEST_CASE("checkpoint round trip reproduces logits bit-exactly") {
    const std::string path = "ketlab_test_ckpt.bin";
    Model model(tiny_config(VariantId::ket_inc_pd));
    const Batch b = tiny_batch(2, 6, 11);
    const Tensor before = model.forward_lm(b);
    save_checkpoint(model, path);
    Model loaded = load_checkpoint(path);
    const Tensor after = loaded.forward_lm(b);
    CHECK(loaded.config().variant == VariantId::ket_inc_pd);
    CHECK(std::memcmp(before.data(), after.data(), static_cast<std::size_t>(before.numel()) * sizeof(double)) == 0);
    std::remove(path.c_str());
}

TEST_CASE("model rejects bad configs") {
    ModelConfig cfg = tiny_config(VariantId::transformer_causal);
    cfg.heads = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(Model{cfg}, std::invalid_argument);
    cfg = tiny_config(VariantId::transformer_causal);
    cfg.vocab = 0;
    CHECK_THROWS_AS(Model{cfg}, std::invalid_argument);
}
