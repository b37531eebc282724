#include "ketlab/completion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ketlab {

double CorruptionSchedule::rate(int s) const {
    if (s < 1 || s > steps)
        throw std::invalid_argument("corruption_rate: s=" + std::to_string(s) + " out of {1.." +
                                    std::to_string(steps) + "}");
    return 0.05 + 0.45 * static_cast<double>(s - 1) / 7.0;
}

double corruption_rate(int s) { return CorruptionSchedule{}.rate(s); }

void corrupt_block(const std::vector<int> &gold, double p, int vocab, Rng &rng, std::vector<int> &corrupted,
                   std::vector<std::uint8_t> &flags) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("corrupt_block: p must be in [0,1]");
    if (p > 0.0 && vocab < 2) throw std::invalid_argument("corrupt_block: need vocab >= 2 to corrupt");
    corrupted.resize(gold.size());
    flags.assign(gold.size(), 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (p > 0.0 && rng.uniform() < p) {
            // uniformly random replacement, never the gold id
            const int r = static_cast<int>(rng.index(static_cast<std::uint64_t>(vocab - 1)));
            corrupted[i] = (r >= gold[i]) ? r + 1 : r;
            flags[i] = 1;
        } else {
            corrupted[i] = gold[i];
        }
    }
}

Tensor block_forward_direct(Model &model, const BlockBatch &batch) {
    const VariantId v = model.config().variant;
    if (v != VariantId::tf_block && v != VariantId::ket_block)
        throw std::invalid_argument("block_forward_direct: " + to_string(v) + " is not a direct block model");
    return model.forward_block_direct(batch.context, batch.batch, batch.context_len);
}

Tensor block_forward_denoise(Model &model, const BlockBatch &batch) {
    if (!is_denoise_variant(model.config().variant))
        throw std::invalid_argument("block_forward_denoise: " + to_string(model.config().variant) +
                                    " is not a denoise model");
    return model.forward_block_denoise(batch.context, batch.corrupted, batch.batch, batch.context_len, batch.step_s);
}

double first_token_ppl(const Tensor &logits, const std::vector<int> &gold, int block) {
    const auto nll = nll_rows(logits, gold);
    double total = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < nll.size(); i += static_cast<std::size_t>(block)) {
        total += nll[i];
        ++n;
    }
    return std::exp(total / static_cast<double>(n));
}

double block_ppl(const Tensor &logits, const std::vector<int> &gold, int block) {
    (void)block;
    const auto nll = nll_rows(logits, gold);
    double total = 0.0;
    for (double v : nll) total += v;
    return std::exp(total / static_cast<double>(nll.size()));
}

BlockBatchStream::BlockBatchStream(const Corpus &corpus, Split split, int context, int batch, int block,
                                   bool denoise, std::uint64_t seed)
    : windows_(corpus, split, context, batch, seed), block_(block), denoise_(denoise),
      vocab_(corpus.vocab.size()), rng_(seed ^ 0xd1b54a32d192ed03ULL) {
    if (block < 1 || block >= context)
        throw std::invalid_argument("block_batch_stream: need 1 <= block < context");
}

BlockBatch BlockBatchStream::next() {
    const Batch w = windows_.next();
    const int S = w.context;
    BlockBatch out;
    out.batch = w.batch;
    out.block = block_;
    // one split per batch keeps the window tensors rectangular; the split
    // position itself is uniform over the valid range
    const int hi = S - block_;
    const int lo = std::min(8, hi);
    out.context_len = lo + static_cast<int>(rng_.index(static_cast<std::uint64_t>(hi - lo + 1)));
    out.context.reserve(static_cast<std::size_t>(w.batch * out.context_len));
    out.gold.reserve(static_cast<std::size_t>(w.batch * block_));
    for (int b = 0; b < w.batch; ++b) {
        const auto *row = w.inputs.data() + static_cast<std::size_t>(b) * S;
        out.context.insert(out.context.end(), row, row + out.context_len);
        out.gold.insert(out.gold.end(), row + out.context_len, row + out.context_len + block_);
    }
    if (denoise_) {
        out.step_s = 1 + static_cast<int>(rng_.index(static_cast<std::uint64_t>(schedule_.steps)));
        corrupt_block(out.gold, schedule_.rate(out.step_s), vocab_, rng_, out.corrupted, out.flags);
    } else {
        out.corrupted = out.gold;
        out.flags.assign(out.gold.size(), 0);
    }
    return out;
}

BlockEvalResult evaluate_block(Model &model, const Corpus &corpus, Split split, int context, int batch, int cap,
                               std::uint64_t seed) {
    const bool denoise = is_denoise_variant(model.config().variant);
    BlockBatchStream stream(corpus, split, context, batch, model.config().block_size, denoise, seed);
    NoGradGuard pause;
    double first_nll = 0.0, all_nll = 0.0;
    std::int64_t first_n = 0, all_n = 0;
    const int Bk = model.config().block_size;
    for (int i = 0; i < cap; ++i) {
        const BlockBatch bb = stream.next();
        const Tensor logits = denoise ? block_forward_denoise(model, bb) : block_forward_direct(model, bb);
        const auto nll = nll_rows(logits, bb.gold);
        for (std::size_t r = 0; r < nll.size(); ++r) {
            all_nll += nll[r];
            ++all_n;
            if (r % static_cast<std::size_t>(Bk) == 0) {
                first_nll += nll[r];
                ++first_n;
            }
        }
    }
    return {std::exp(first_nll / static_cast<double>(first_n)), std::exp(all_nll / static_cast<double>(all_n))};
}

BlockRunResult train_block(Model &model, const Corpus &corpus, const TrainConfig &cfg,
                           const std::string &dataset_name) {
    if (!is_block_variant(model.config().variant))
        throw std::invalid_argument("train_block: " + to_string(model.config().variant) + " is not a block model");
    const bool denoise = is_denoise_variant(model.config().variant);
    const int S = model.config().context;
    const int eval_cap = cfg.eval_cap > 0 ? cfg.eval_cap : 100;

    BlockRunResult result;
    RunSummary &summary = result.summary;
    summary.variant = to_string(model.config().variant);
    summary.regime = "-";
    summary.dataset = dataset_name;
    summary.steps = cfg.steps;
    summary.seed = cfg.seed;
    summary.model_cfg = model.config();
    summary.train_cfg = cfg;

    BlockBatchStream stream(corpus, Split::train, S, cfg.batch, model.config().block_size, denoise, cfg.seed);
    AdamW opt(model.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

    const auto start = std::chrono::steady_clock::now();
    double loss_value = 0.0;
    auto elapsed = [&start] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    for (int step = 1; step <= cfg.steps; ++step) {
        const BlockBatch bb = stream.next();
        {
            Graph graph;
            const Tensor logits = denoise ? block_forward_denoise(model, bb) : block_forward_direct(model, bb);
            const Tensor loss = cross_entropy(logits, bb.gold);
            loss_value = loss.item();
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train_block: non-finite loss at step " + std::to_string(step));
            graph.backward(loss);
        }
        auto &params = model.parameters();
        clip_grad_norm(params, cfg.clip);
        opt.step();
        opt.zero_grad();
        if (step % cfg.report_every == 0 || step == cfg.steps)
            summary.metrics.push_back({step, "train", loss_value, std::exp(loss_value), elapsed()});
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && step != cfg.steps) {
            const auto ev = evaluate_block(model, corpus, Split::test, S, cfg.batch, eval_cap, cfg.seed);
            result.rows.push_back({dataset_name, summary.variant, model.config().layers, cfg.seed, step,
                                   ev.first_ppl, ev.block_ppl});
        }
    }
    const auto val = evaluate_block(model, corpus, Split::valid, S, cfg.batch, eval_cap, cfg.seed);
    const auto test = evaluate_block(model, corpus, Split::test, S, cfg.batch, eval_cap, cfg.seed);
    result.rows.push_back({dataset_name, summary.variant, model.config().layers, cfg.seed, cfg.steps, test.first_ppl,
                           test.block_ppl});
    summary.final_train_loss = loss_value;
    summary.val_ppl = val.block_ppl;
    summary.test_ppl = test.block_ppl;
    summary.wall_seconds = elapsed();
    summary.iters_per_sec = static_cast<double>(cfg.steps) / summary.wall_seconds;
    return result;
}

}  // namespace ketlab
