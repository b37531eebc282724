#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ketlab/corpus.hpp"
#include "ketlab/model.hpp"
#include "ketlab/optim.hpp"

namespace ketlab {

struct TrainConfig {
    double lr = 3e-4;
    double weight_decay = 1e-5;
    double clip = 1.0;
    int steps = 500;
    int batch = 16;
    int eval_every = 1000;
    int report_every = 100;
    std::uint64_t seed = 7;
    int eval_cap = 0;  // batches per evaluation; 0 = whole split
    // Leakage protocol: train and evaluate against within-batch shuffled
    // targets instead of the true ones.
    bool shuffled_targets = false;
};

struct MetricsRow {
    int step = 0;
    std::string split;  // train / valid / test
    double loss = 0.0;
    double ppl = 0.0;
    double wall_sec = 0.0;
};

struct RunSummary {
    std::string variant;
    std::string regime;  // "-" for block models
    std::string dataset;
    double final_train_loss = 0.0;
    double val_ppl = 0.0;
    double test_ppl = 0.0;
    int steps = 0;
    double wall_seconds = 0.0;
    double iters_per_sec = 0.0;
    std::uint64_t seed = 0;
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    // evaluation windows never overlap; recorded here so artifacts carry
    // the convention
    std::string eval_windows = "non-overlapping";
    std::vector<MetricsRow> metrics;
};

double perplexity(double mean_nll);

// Token-weighted teacher-forced perplexity over up to `cap` batches of the
// split (0 = all). Deterministic: windows are visited in stream order.
double evaluate_ppl(Model &model, const Corpus &corpus, Split split, int context, int batch, int cap = 0,
                    bool shuffled_targets = false, std::uint64_t shuffle_seed = 0);

// forward -> loss -> backward -> clip -> adamw step, with periodic
// reporting and evaluation. Deterministic for a fixed (cfg, seed, corpus).
RunSummary train_lm(Model &model, const Corpus &corpus, const TrainConfig &cfg, const std::string &dataset_name);

// (causal_best - pred_next) / (causal_best - aug_best): how far endogenous
// self-conditioning closes the causal-to-augmented gap.
double transition_gain(double ppl_causal_best, double ppl_pred_next, double ppl_aug_best);

}  // namespace ketlab
