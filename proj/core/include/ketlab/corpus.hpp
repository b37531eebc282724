#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ketlab/rng.hpp"

namespace ketlab {

// Word-level vocabulary. Id 0 is the unk token; words follow in
// (frequency desc, first occurrence asc) order.
struct Vocab {
    std::vector<std::string> tokens;  // id -> token
    std::unordered_map<std::string, int> ids;
    int unk_id = 0;

    int size() const { return static_cast<int>(tokens.size()); }
    int encode_one(const std::string &tok) const {
        auto it = ids.find(tok);
        return it == ids.end() ? unk_id : it->second;
    }
    std::vector<int> encode(const std::string &text) const;
    // one token per line, line number = id
    void dump(const std::string &path) const;
};

Vocab build_vocab(const std::string &text, int max_size);

struct SplitSpec {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

enum class Split { train, valid, test };

// Token stream plus contiguous, disjoint split bounds over it.
struct Corpus {
    Vocab vocab;
    std::vector<int> stream;
    // half-open [begin, end) token ranges, in train/valid/test order
    std::array<std::pair<std::size_t, std::size_t>, 3> bounds{};

    std::pair<std::size_t, std::size_t> split_range(Split s) const {
        return bounds[static_cast<std::size_t>(s)];
    }
};

Corpus corpus_from_text(const std::string &text, int max_vocab, SplitSpec spec = {});
Corpus corpus_from_file(const std::string &path, int max_vocab, SplitSpec spec = {});

struct Batch {
    int batch = 0;    // B
    int context = 0;  // S
    std::vector<int> inputs;   // B*S, row-major
    std::vector<int> targets;  // B*S, inputs advanced by one over the stream
};

// Deterministic batch producer over one split: contiguous non-overlapping
// windows, window order reshuffled each epoch from the seed.
class BatchStream {
public:
    BatchStream(const Corpus &corpus, Split split, int context, int batch, std::uint64_t seed);

    Batch next();
    // Batches per epoch.
    std::size_t batches_per_epoch() const;
    // Restart from the first epoch, same seed.
    void reset();

private:
    void reshuffle();

    const std::vector<int> *stream_;
    std::size_t begin_ = 0, end_ = 0;
    int context_ = 0, batch_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<std::size_t> windows_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

// Uniform permutation of the flattened target array; inputs untouched.
Batch shuffle_targets(const Batch &batch, std::uint64_t seed);

// Structured synthetic corpus: `groups` distinct word groups, each a fixed
// deterministic sequence of `group_len` unique tokens, emitted in uniformly
// random order. Group boundaries are unpredictable from the prefix while
// within-group continuations are deterministic.
std::string synthetic_text(int groups = 120, int group_len = 4, int count = 20000, std::uint64_t seed = 42);

}  // namespace ketlab
