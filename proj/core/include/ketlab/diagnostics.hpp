#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ketlab/corpus.hpp"
#include "ketlab/model.hpp"
#include "ketlab/train.hpp"

namespace ketlab {

// Max |delta| in the logits at positions <= t after replacing the input
// token at position s > t with (id + 1) mod V. Zero for every (t, s) is the
// behavioral definition of a strict-causal model.
double causality_probe(Model &model, const Batch &batch, int t, int s);

struct ProbeDelta {
    int t = 0;
    int s = 0;
    double max_abs_delta = 0.0;
};

struct ProbeReport {
    std::string variant;
    int context = 0;
    std::vector<ProbeDelta> deltas;
    double max_delta = 0.0;
    bool causal = false;  // true iff every delta is exactly 0
};

// Probes every (t, s > t) pair of the first sequence in the batch.
ProbeReport probe_variant(Model &model, const Batch &batch);

struct LeakageConfig {
    int steps = 200;
    int context = 32;
    int batch = 8;
    int width = 32;
    int layers = 2;
    int heads = 4;
    double lr = 3e-4;
    std::uint64_t seed = 7;
    // leaking iff shuffled-target PPL < ratio * true-target PPL of the
    // strict-causal baseline on the same corpus and schedule
    double threshold_ratio = 0.2;
};

struct LeakageReport {
    std::string variant;
    double true_ppl = 0.0;
    double shuffled_ppl = 0.0;
    double baseline_true_ppl = 0.0;  // transformer_causal, true targets
    double threshold = 0.0;
    bool leaking = false;
};

// Two short trainings of the candidate (true vs shuffled targets) plus the
// strict-causal baseline; verdict from the threshold ratio.
LeakageReport leakage_shuffle_test(VariantId variant, const Corpus &corpus, const LeakageConfig &cfg);

struct DetachAuditReport {
    std::string variant;
    double aux_grad_w_out = 0.0;           // through the carrier path, detach on
    double aux_grad_w_out_no_detach = 0.0; // negative control
    double lm_grad_w_out = 0.0;            // ordinary head path
    double lm_grad_emb = 0.0;              // ordinary embedding path
    bool pass = false;
};

// Asserts that the aggregation loss path sends exactly zero gradient into
// the carrier's pre-detach subgraph (W_out), that removing the detach would
// not (negative control), and that the ordinary head/embedding paths still
// carry gradient.
DetachAuditReport detach_gradient_audit(Model &model, const Batch &batch);

enum class ScalingKind { ket_quadratic, ket_incidence };

struct ScalingSample {
    int S = 0;
    double seconds = 0.0;
};

struct ScalingResult {
    ScalingKind kind;
    std::vector<ScalingSample> samples;
    double exponent = 0.0;  // log-log regression slope of time vs S
};

// Forward wall time of the block alone across a geometric S grid.
ScalingResult scaling_measurement(ScalingKind kind, const std::vector<int> &lengths, int width = 32);

}  // namespace ketlab
