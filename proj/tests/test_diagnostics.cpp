// Behavioral regime verification: causality probe, detach audit, and the
// scaling harness plumbing. The heavy leakage/scaling runs live in the
// acceptance suite.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ketlab/corpus.hpp"
#include "ketlab/diagnostics.hpp"
#include "ketlab/model.hpp"

using namespace ketlab;

namespace {

ModelConfig probe_config(VariantId v) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.layers = 2;
    cfg.width = 16;
    cfg.heads = 2;
    cfg.context = 12;
    cfg.vocab = 23;
    cfg.seed = 11;
    return cfg;
}

Batch probe_batch(int S, int vocab, std::uint64_t seed = 9) {
    Rng rng(seed);
    Batch b;
    b.batch = 1;
    b.context = S;
    b.inputs.push_back(static_cast<int>(rng.index(vocab)));
    for (int i = 1; i < S; ++i) {
        b.inputs.push_back(static_cast<int>(rng.index(vocab)));
        b.targets.push_back(b.inputs.back());
    }
    b.targets.push_back(static_cast<int>(rng.index(vocab)));
    return b;
}

}  // namespace

TEST_CASE("probe rejects s <= t") {
    Model model(probe_config(VariantId::transformer_causal));
    const Batch b = probe_batch(12, 23);
    CHECK_THROWS_AS(causality_probe(model, b, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(causality_probe(model, b, 3, 2), std::invalid_argument);
}

TEST_CASE("transformer_causal probes to exactly zero at every pair") {
    Model model(probe_config(VariantId::transformer_causal));
    const ProbeReport report = probe_variant(model, probe_batch(12, 23));
    CHECK(report.causal);
    CHECK(report.max_delta == 0.0);
    CHECK(report.deltas.size() == 12 * 11 / 2);
}

TEST_CASE("gt_noncausal shows a nonzero delta at s = t+1") {
    Model model(probe_config(VariantId::gt_noncausal));
    const Batch b = probe_batch(12, 23);
    CHECK(causality_probe(model, b, 4, 5) > 0.0);
}

TEST_CASE("ket_inc_pd leaks only through carrier values at s = t+1") {
    Model model(probe_config(VariantId::ket_inc_pd));
    const Batch b = probe_batch(12, 23);
    CHECK(causality_probe(model, b, 4, 5) > 0.0);
    // the incidence window is one edge wide: s = t+2 cannot reach t
    // within a 2-layer stack... it can via stacking, so only assert t+1
}

TEST_CASE("probe partitions a spot-check of variants per regime") {
    for (VariantId v : {VariantId::gt_pred_prev_causal_detach, VariantId::ket_quad_causal,
                        VariantId::topocoend_causal}) {
        CAPTURE(to_string(v));
        Model model(probe_config(v));
        const ProbeReport report = probe_variant(model, probe_batch(12, 23));
        CHECK(report.causal);
    }
    for (VariantId v : {VariantId::gt_pred_next_detach, VariantId::ket_quad_pd, VariantId::topocoend_pd,
                        VariantId::transformer_future_hint}) {
        CAPTURE(to_string(v));
        Model model(probe_config(v));
        const ProbeReport report = probe_variant(model, probe_batch(12, 23));
        CHECK_FALSE(report.causal);
    }
}

TEST_CASE("detach audit passes on every carrier variant and the negative control bites") {
    for (VariantId v : lm_variants()) {
        if (!uses_carrier(v)) continue;
        CAPTURE(to_string(v));
        Model model(probe_config(v));
        Batch b = probe_batch(12, 23);
        b.batch = 1;
        const DetachAuditReport report = detach_gradient_audit(model, b);
        CHECK(report.pass);
        CHECK(report.aux_grad_w_out == 0.0);
        CHECK(report.aux_grad_w_out_no_detach > 0.0);
        CHECK(report.lm_grad_w_out > 0.0);
        CHECK(report.lm_grad_emb > 0.0);
    }
}

TEST_CASE("detach audit rejects carrier-free variants") {
    Model model(probe_config(VariantId::transformer_causal));
    CHECK_THROWS_AS(detach_gradient_audit(model, probe_batch(12, 23)), std::invalid_argument);
}

TEST_CASE("scaling measurement needs at least 3 grid points") {
    CHECK_THROWS_AS(scaling_measurement(ScalingKind::ket_quadratic, {64, 128}), std::invalid_argument);
}

TEST_CASE("scaling measurement produces positive times and a sane exponent on a small grid") {
    const ScalingResult quad = scaling_measurement(ScalingKind::ket_quadratic, {32, 64, 128}, 16);
    REQUIRE(quad.samples.size() == 3);
    for (const auto &s : quad.samples) CHECK(s.seconds > 0.0);
    CHECK(quad.samples[2].seconds > quad.samples[0].seconds);
    CHECK(quad.exponent > 0.5);
}

TEST_CASE("leakage threshold logic uses the causal baseline ratio") {
    // plumbing-level check on a minuscule schedule; the acceptance suite
    // runs the full protocol
    const Corpus c = corpus_from_text(synthetic_text(12, 4, 1500, 21), 256);
    LeakageConfig cfg;
    cfg.steps = 30;
    cfg.context = 12;
    cfg.batch = 4;
    cfg.width = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.seed = 3;
    const LeakageReport report = leakage_shuffle_test(VariantId::transformer_causal, c, cfg);
    CHECK(report.threshold == doctest::Approx(0.2 * report.baseline_true_ppl));
    CHECK(report.true_ppl == report.baseline_true_ppl);  // same run twice
    CHECK_FALSE(report.leaking);  // causal model cannot learn shuffled targets in 30 steps
}
