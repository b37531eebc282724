// Corruption schedule, block corruption, direct and denoise forwards, and
// the first-token / block perplexity metrics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <map>

#include "doctest.h"
#include "ketlab/completion.hpp"
#include "ketlab/corpus.hpp"
#include "ketlab/model.hpp"

using namespace ketlab;

namespace {

ModelConfig block_config(VariantId v, int vocab) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.layers = 1;
    cfg.width = 16;
    cfg.heads = 2;
    cfg.context = 24;
    cfg.vocab = vocab;
    cfg.block_size = 4;
    cfg.seed = 7;
    return cfg;
}

BlockBatch tiny_block_batch(int B, int ctx_len, int Bk, int vocab, int s, std::uint64_t seed = 5) {
    Rng rng(seed);
    BlockBatch bb;
    bb.batch = B;
    bb.context_len = ctx_len;
    bb.block = Bk;
    bb.step_s = s;
    for (int i = 0; i < B * ctx_len; ++i) bb.context.push_back(static_cast<int>(rng.index(vocab)));
    for (int i = 0; i < B * Bk; ++i) bb.gold.push_back(static_cast<int>(rng.index(vocab)));
    if (s > 0) {
        corrupt_block(bb.gold, corruption_rate(s), vocab, rng, bb.corrupted, bb.flags);
    } else {
        bb.corrupted = bb.gold;
        bb.flags.assign(bb.gold.size(), 0);
    }
    return bb;
}

}  // namespace

TEST_CASE("corruption schedule endpoints and midpoint are exact") {
    CHECK(corruption_rate(1) == 0.05);
    CHECK(corruption_rate(8) == 0.50);
    CHECK(corruption_rate(5) == doctest::Approx(0.05 + 0.45 * 4.0 / 7.0).epsilon(1e-15));
    for (int s = 1; s < 8; ++s) CHECK(corruption_rate(s) < corruption_rate(s + 1));
    CHECK_THROWS_AS(corruption_rate(0), std::invalid_argument);
    CHECK_THROWS_AS(corruption_rate(9), std::invalid_argument);
}

TEST_CASE("corrupt_block p=0 is the identity with no flags") {
    Rng rng(1);
    const std::vector<int> gold{3, 1, 4, 1, 5};
    std::vector<int> corrupted;
    std::vector<std::uint8_t> flags;
    corrupt_block(gold, 0.0, 10, rng, corrupted, flags);
    CHECK(corrupted == gold);
    for (auto f : flags) CHECK(f == 0);
}

TEST_CASE("corrupt_block p=1 flips every position away from gold") {
    Rng rng(2);
    std::vector<int> gold(200);
    for (std::size_t i = 0; i < gold.size(); ++i) gold[i] = static_cast<int>(i % 9);
    std::vector<int> corrupted;
    std::vector<std::uint8_t> flags;
    corrupt_block(gold, 1.0, 9, rng, corrupted, flags);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        CHECK(flags[i] == 1);
        CHECK(corrupted[i] != gold[i]);
        CHECK(corrupted[i] >= 0);
        CHECK(corrupted[i] < 9);
    }
}

TEST_CASE("corrupt_block empirical flip rate is within 0.01 of p over 1e5 draws") {
    Rng rng(3);
    const int n = 100000;
    std::vector<int> gold(n, 4);
    std::vector<int> corrupted;
    std::vector<std::uint8_t> flags;
    for (double p : {0.05, 0.30714285714285716, 0.5}) {
        corrupt_block(gold, p, 50, rng, corrupted, flags);
        int flips = 0;
        for (int i = 0; i < n; ++i) {
            flips += flags[i];
            if (flags[i]) CHECK(corrupted[i] != 4);
            if (!flags[i]) CHECK(corrupted[i] == 4);
        }
        CHECK(std::abs(static_cast<double>(flips) / n - p) < 0.01);
    }
}

TEST_CASE("corrupt_block rejects vocab < 2 when p > 0") {
    Rng rng(4);
    std::vector<int> corrupted;
    std::vector<std::uint8_t> flags;
    const std::vector<int> gold{0, 0};
    CHECK_THROWS_AS(corrupt_block(gold, 0.5, 1, rng, corrupted, flags), std::invalid_argument);
}

TEST_CASE("direct block logits have shape B x Bk x V and ignore the gold block") {
    const int V = 17;
    Model model(block_config(VariantId::tf_block, V));
    BlockBatch bb = tiny_block_batch(3, 10, 4, V, 0);
    const Tensor logits = block_forward_direct(model, bb);
    CHECK(logits.rows() == 12);  // B * Bk
    CHECK(logits.cols() == V);

    BlockBatch other = bb;
    for (auto &g : other.gold) g = (g + 3) % V;
    const Tensor logits2 = block_forward_direct(model, other);
    CHECK(std::memcmp(logits.data(), logits2.data(), static_cast<std::size_t>(logits.numel()) * sizeof(double)) == 0);
}

TEST_CASE("direct block with Bk=1 reduces to one logit row per sequence") {
    const int V = 11;
    ModelConfig cfg = block_config(VariantId::ket_block, V);
    cfg.block_size = 1;
    Model model(cfg);
    BlockBatch bb = tiny_block_batch(2, 8, 1, V, 0);
    const Tensor logits = block_forward_direct(model, bb);
    CHECK(logits.rows() == 2);
    CHECK(logits.cols() == V);
}

TEST_CASE("block forwards reject the wrong model kind") {
    const int V = 11;
    Model direct(block_config(VariantId::tf_block, V));
    Model denoise(block_config(VariantId::tf_denoise, V));
    BlockBatch bb = tiny_block_batch(1, 8, 4, V, 3);
    CHECK_THROWS_AS(block_forward_denoise(direct, bb), std::invalid_argument);
    bb.step_s = 0;
    CHECK_THROWS_AS(block_forward_direct(denoise, bb), std::invalid_argument);
}

TEST_CASE("denoise forward consumes the corrupted block and the schedule step matters") {
    const int V = 13;
    Model model(block_config(VariantId::tf_denoise, V));
    BlockBatch bb = tiny_block_batch(2, 10, 4, V, 3);
    const Tensor base = block_forward_denoise(model, bb);
    CHECK(base.rows() == 8);
    CHECK(base.cols() == V);

    // changing s changes the logits (noise-step embedding is active)
    BlockBatch other_s = bb;
    other_s.step_s = 7;
    const Tensor shifted = block_forward_denoise(model, other_s);
    double delta = 0.0;
    for (std::int64_t i = 0; i < base.numel(); ++i) delta += std::abs(base.data()[i] - shifted.data()[i]);
    CHECK(delta > 0.0);

    // p=0 corruption feeds the gold block itself
    BlockBatch clean = bb;
    clean.corrupted = clean.gold;
    const Tensor easy = block_forward_denoise(model, clean);
    CHECK(easy.rows() == 8);
}

TEST_CASE("denoise logits at offset j never depend on corrupted values at offsets > j") {
    const int V = 13;
    Model model(block_config(VariantId::ket_denoise, V));
    const int B = 1, ctx = 10, Bk = 4;
    BlockBatch bb = tiny_block_batch(B, ctx, Bk, V, 4);
    const Tensor base = block_forward_denoise(model, bb);
    for (int j = 0; j < Bk - 1; ++j) {
        for (int later = j + 1; later < Bk; ++later) {
            BlockBatch perturbed = bb;
            perturbed.corrupted[static_cast<std::size_t>(later)] =
                (perturbed.corrupted[static_cast<std::size_t>(later)] + 1) % V;
            const Tensor out = block_forward_denoise(model, perturbed);
            for (int v = 0; v < V; ++v)
                CHECK(base.data()[j * V + v] == out.data()[j * V + v]);  // bit-exact
        }
    }
}

TEST_CASE("first-token and block perplexity closed forms") {
    const int V = 50;
    Tensor uniform(Shape{8, V});
    std::vector<int> gold(8, 7);
    CHECK(first_token_ppl(uniform, gold, 4) == doctest::Approx(50.0));
    CHECK(block_ppl(uniform, gold, 4) == doctest::Approx(50.0));

    // Bk=1: both metrics coincide
    Tensor one(Shape{3, V});
    std::vector<int> g1(3, 0);
    CHECK(first_token_ppl(one, g1, 1) == doctest::Approx(block_ppl(one, g1, 1)));
}

TEST_CASE("block perplexity is the geometric mean: NLLs ln2,ln4,ln4,ln8 give 4") {
    // two-way logits [0, log(k-1)] with target 0 give NLL = log(k)
    auto row = [](double k) { return std::vector<double>{0.0, std::log(k - 1.0)}; };
    std::vector<double> data;
    for (double k : {2.0, 4.0, 4.0, 8.0}) {
        const auto r = row(k);
        data.insert(data.end(), r.begin(), r.end());
    }
    const Tensor logits = Tensor::from_data({4, 2}, data);
    const std::vector<int> gold(4, 0);
    CHECK(block_ppl(logits, gold, 4) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(first_token_ppl(logits, gold, 4) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("denoise training draws every schedule step with frequency 1/8 within 0.02") {
    const Corpus c = corpus_from_text(synthetic_text(16, 4, 4000, 11), 512);
    BlockBatchStream stream(c, Split::train, 24, 2, 4, true, 123);
    std::map<int, int> counts;
    const int n = 4000;
    for (int i = 0; i < n; ++i) counts[stream.next().step_s]++;
    for (int s = 1; s <= 8; ++s)
        CHECK(std::abs(static_cast<double>(counts[s]) / n - 0.125) < 0.02);
}

TEST_CASE("block batch stream splits respect t + Bk <= S and corruption flags are consistent") {
    const Corpus c = corpus_from_text(synthetic_text(16, 4, 3000, 12), 512);
    BlockBatchStream stream(c, Split::train, 24, 3, 4, true, 77);
    for (int i = 0; i < 50; ++i) {
        const BlockBatch bb = stream.next();
        CHECK(bb.context_len + bb.block <= 24);
        CHECK(bb.context_len >= 1);
        for (std::size_t j = 0; j < bb.gold.size(); ++j) {
            if (bb.flags[j]) {
                CHECK(bb.corrupted[j] != bb.gold[j]);
            } else {
                CHECK(bb.corrupted[j] == bb.gold[j]);
            }
        }
    }
}

TEST_CASE("train_block runs a denoise model end to end and reports both metrics") {
    const Corpus c = corpus_from_text(synthetic_text(12, 4, 2500, 13), 512);
    Model model(block_config(VariantId::tf_denoise, c.vocab.size()));
    TrainConfig tc;
    tc.steps = 10;
    tc.batch = 2;
    tc.eval_every = 0;
    tc.report_every = 5;
    tc.eval_cap = 3;
    tc.seed = 7;
    const BlockRunResult result = train_block(model, c, tc, "tiny");
    REQUIRE(!result.rows.empty());
    const auto &last = result.rows.back();
    CHECK(last.step == 10);
    CHECK(last.first_ppl > 0.0);
    CHECK(last.block_ppl > 0.0);
    CHECK(result.summary.regime == "-");
}
