#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ketlab/corpus.hpp"
#include "ketlab/model.hpp"
#include "ketlab/rng.hpp"
#include "ketlab/train.hpp"

namespace ketlab {

// 8-step corruption schedule p(s) = 0.05 + 0.45 (s-1)/7, s in {1..8}:
// 0.05 at s=1 rising to 0.50 at s=8.
struct CorruptionSchedule {
    int steps = 8;
    double rate(int s) const;
};

double corruption_rate(int s);

struct BlockBatch {
    int batch = 0;
    int context_len = 0;
    int block = 0;  // Bk
    int step_s = 0; // 0 for direct runs
    std::vector<int> context;           // batch * context_len
    std::vector<int> gold;              // batch * block
    std::vector<int> corrupted;         // batch * block
    std::vector<std::uint8_t> flags;    // corruption flags
};

// Each position flips independently with probability p; a flipped position
// receives a uniformly random id different from its gold id.
void corrupt_block(const std::vector<int> &gold, double p, int vocab, Rng &rng, std::vector<int> &corrupted,
                   std::vector<std::uint8_t> &flags);

// Spec surface over Model: rejects models of the wrong kind.
Tensor block_forward_direct(Model &model, const BlockBatch &batch);
Tensor block_forward_denoise(Model &model, const BlockBatch &batch);

// exp(mean NLL at block offset 1) and pooled over all offsets.
double first_token_ppl(const Tensor &logits, const std::vector<int> &gold, int block);
double block_ppl(const Tensor &logits, const std::vector<int> &gold, int block);

// Deterministic sampler of block batches: one split position per batch,
// uniform over t with t + Bk <= S, plus per-row corruption for denoise runs.
class BlockBatchStream {
public:
    BlockBatchStream(const Corpus &corpus, Split split, int context, int batch, int block, bool denoise,
                     std::uint64_t seed);
    BlockBatch next();

private:
    BatchStream windows_;
    int block_;
    bool denoise_;
    int vocab_;
    Rng rng_;
    CorruptionSchedule schedule_;
    std::uint64_t eval_counter_ = 0;
};

struct BlockEvalResult {
    double first_ppl = 0.0;
    double block_ppl = 0.0;
};

BlockEvalResult evaluate_block(Model &model, const Corpus &corpus, Split split, int context, int batch, int cap,
                               std::uint64_t seed);

struct BlockRunRow {
    std::string dataset;
    std::string model;
    int layers = 0;
    std::uint64_t seed = 0;
    int step = 0;
    double first_ppl = 0.0;
    double block_ppl = 0.0;
};

struct BlockRunResult {
    RunSummary summary;
    std::vector<BlockRunRow> rows;  // all_runs.csv rows
};

BlockRunResult train_block(Model &model, const Corpus &corpus, const TrainConfig &cfg,
                           const std::string &dataset_name);

}  // namespace ketlab
