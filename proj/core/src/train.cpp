#include "ketlab/train.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ketlab {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

double perplexity(double mean_nll) {
    if (!std::isfinite(mean_nll)) throw std::invalid_argument("perplexity: mean_nll must be finite");
    return std::exp(mean_nll);
}

double evaluate_ppl(Model &model, const Corpus &corpus, Split split, int context, int batch, int cap,
                    bool shuffled_targets, std::uint64_t shuffle_seed) {
    auto [begin, end] = corpus.split_range(split);
    if (end <= begin) throw std::invalid_argument("evaluate_ppl: empty split");
    // fixed stream seed: every evaluation of a split visits the same
    // non-overlapping windows in the same order
    BatchStream stream(corpus, split, context, batch, 12345);
    const std::size_t nbatches = stream.batches_per_epoch();
    std::size_t use = (cap > 0) ? std::min<std::size_t>(nbatches, static_cast<std::size_t>(cap)) : nbatches;
    if (use == 0) throw std::invalid_argument("evaluate_ppl: split too small for one batch");
    NoGradGuard pause;
    double total_nll = 0.0;
    std::int64_t total_tokens = 0;
    Rng shuffle_rng(shuffle_seed);
    for (std::size_t i = 0; i < use; ++i) {
        Batch b = stream.next();
        if (shuffled_targets) b = shuffle_targets(b, shuffle_rng.next_u64());
        ForwardOptions opts;
        if (model.config().variant == VariantId::transformer_future_hint) opts.gold_hint = &b.targets;
        const Tensor logits = model.forward_lm(b, opts);
        const auto nll = nll_rows(logits, b.targets);
        for (double v : nll) total_nll += v;
        total_tokens += static_cast<std::int64_t>(nll.size());
    }
    return perplexity(total_nll / static_cast<double>(total_tokens));
}

RunSummary train_lm(Model &model, const Corpus &corpus, const TrainConfig &cfg, const std::string &dataset_name) {
    if (cfg.steps < 1) throw std::invalid_argument("train_lm: steps must be >= 1");
    const int S = model.config().context;
    RunSummary summary;
    summary.variant = to_string(model.config().variant);
    summary.regime = is_lm_variant(model.config().variant) ? to_string(regime_of(model.config().variant)) : "-";
    summary.dataset = dataset_name;
    summary.steps = cfg.steps;
    summary.seed = cfg.seed;
    summary.model_cfg = model.config();
    summary.train_cfg = cfg;

    BatchStream stream(corpus, Split::train, S, cfg.batch, cfg.seed);
    AdamW opt(model.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    const auto start = std::chrono::steady_clock::now();
    double loss_value = 0.0;
    for (int step = 1; step <= cfg.steps; ++step) {
        Batch b = stream.next();
        if (cfg.shuffled_targets) b = shuffle_targets(b, shuffle_rng.next_u64());
        {
            Graph graph;
            ForwardOptions opts;
            if (model.config().variant == VariantId::transformer_future_hint) opts.gold_hint = &b.targets;
            const Tensor logits = model.forward_lm(b, opts);
            const Tensor loss = cross_entropy(logits, b.targets);
            loss_value = loss.item();
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train_lm: non-finite loss at step " + std::to_string(step));
            graph.backward(loss);
        }
        auto &params = model.parameters();
        clip_grad_norm(params, cfg.clip);
        opt.step();
        opt.zero_grad();

        if (step % cfg.report_every == 0 || step == cfg.steps)
            summary.metrics.push_back({step, "train", loss_value, perplexity(loss_value), seconds_since(start)});
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && step != cfg.steps) {
            const double ppl = evaluate_ppl(model, corpus, Split::valid, S, cfg.batch, cfg.eval_cap,
                                            cfg.shuffled_targets, cfg.seed);
            summary.metrics.push_back({step, "valid", std::log(ppl), ppl, seconds_since(start)});
        }
    }
    summary.final_train_loss = loss_value;
    summary.val_ppl =
        evaluate_ppl(model, corpus, Split::valid, S, cfg.batch, cfg.eval_cap, cfg.shuffled_targets, cfg.seed);
    summary.test_ppl =
        evaluate_ppl(model, corpus, Split::test, S, cfg.batch, cfg.eval_cap, cfg.shuffled_targets, cfg.seed);
    summary.metrics.push_back({cfg.steps, "valid", std::log(summary.val_ppl), summary.val_ppl, seconds_since(start)});
    summary.metrics.push_back({cfg.steps, "test", std::log(summary.test_ppl), summary.test_ppl, seconds_since(start)});
    summary.wall_seconds = seconds_since(start);
    summary.iters_per_sec = static_cast<double>(cfg.steps) / summary.wall_seconds;
    return summary;
}

double transition_gain(double ppl_causal_best, double ppl_pred_next, double ppl_aug_best) {
    if (!(ppl_causal_best > ppl_aug_best))
        throw std::invalid_argument("transition_gain: need causal_best > aug_best, got " +
                                    std::to_string(ppl_causal_best) + " vs " + std::to_string(ppl_aug_best));
    return (ppl_causal_best - ppl_pred_next) / (ppl_causal_best - ppl_aug_best);
}

}  // namespace ketlab
