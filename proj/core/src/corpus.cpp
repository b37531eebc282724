#include "ketlab/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ketlab {

namespace {

std::vector<std::string> split_whitespace(const std::string &text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\v' || ch == '\f') {
            if (!cur.empty()) {
                words.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

constexpr const char *kUnkToken = "<unk>";

}  // namespace

std::vector<int> Vocab::encode(const std::string &text) const {
    std::vector<int> out;
    for (const auto &w : split_whitespace(text)) out.push_back(encode_one(w));
    return out;
}

void Vocab::dump(const std::string &path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("vocab: cannot write " + path);
    for (const auto &tok : tokens) os << tok << "\n";
}

Vocab build_vocab(const std::string &text, int max_size) {
    const auto words = split_whitespace(text);
    if (words.empty()) throw std::invalid_argument("build_vocab: empty text");
    if (max_size < 2) throw std::invalid_argument("build_vocab: max_size must be >= 2");

    std::unordered_map<std::string, std::pair<std::int64_t, std::size_t>> stats;  // word -> (count, first pos)
    for (std::size_t i = 0; i < words.size(); ++i) {
        auto [it, inserted] = stats.try_emplace(words[i], 0, i);
        ++it->second.first;
    }
    std::vector<const std::pair<const std::string, std::pair<std::int64_t, std::size_t>> *> order;
    order.reserve(stats.size());
    for (const auto &kv : stats) order.push_back(&kv);
    std::sort(order.begin(), order.end(), [](auto *a, auto *b) {
        if (a->second.first != b->second.first) return a->second.first > b->second.first;
        return a->second.second < b->second.second;  // ties by first occurrence
    });

    Vocab v;
    v.tokens.push_back(kUnkToken);
    v.unk_id = 0;
    const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(max_size) - 1);
    for (std::size_t i = 0; i < keep; ++i) v.tokens.push_back(order[i]->first);
    for (std::size_t i = 0; i < v.tokens.size(); ++i) v.ids[v.tokens[i]] = static_cast<int>(i);
    return v;
}

Corpus corpus_from_text(const std::string &text, int max_vocab, SplitSpec spec) {
    if (spec.train <= 0.0 || spec.valid <= 0.0 || spec.test <= 0.0)
        throw std::invalid_argument("corpus: split fractions must be positive");
    if (std::abs(spec.train + spec.valid + spec.test - 1.0) > 1e-9)
        throw std::invalid_argument("corpus: split fractions must sum to 1");
    Corpus c;
    c.vocab = build_vocab(text, max_vocab);
    c.stream = c.vocab.encode(text);
    const std::size_t n = c.stream.size();
    const std::size_t t0 = static_cast<std::size_t>(spec.train * static_cast<double>(n));
    const std::size_t t1 = t0 + static_cast<std::size_t>(spec.valid * static_cast<double>(n));
    c.bounds[0] = {0, t0};
    c.bounds[1] = {t0, t1};
    c.bounds[2] = {t1, n};
    return c;
}

Corpus corpus_from_file(const std::string &path, int max_vocab, SplitSpec spec) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("corpus: cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return corpus_from_text(ss.str(), max_vocab, spec);
}

BatchStream::BatchStream(const Corpus &corpus, Split split, int context, int batch, std::uint64_t seed)
    : stream_(&corpus.stream), context_(context), batch_(batch), seed_(seed), rng_(seed) {
    if (context < 1 || batch < 1) throw std::invalid_argument("batch_stream: context and batch must be >= 1");
    auto [b, e] = corpus.split_range(split);
    begin_ = b;
    end_ = e;
    const std::size_t S = static_cast<std::size_t>(context_);
    // each window needs S inputs plus the shifted target at window start + S
    if (end_ < begin_ + S + 1)
        throw std::invalid_argument("batch_stream: split has " + std::to_string(end_ - begin_) +
                                    " tokens, needs at least " + std::to_string(S + 1));
    for (std::size_t w = begin_; w + S < end_; w += S) windows_.push_back(w);
    if (windows_.size() < static_cast<std::size_t>(batch_))
        throw std::invalid_argument("batch_stream: split too small for batch size " + std::to_string(batch_));
    reshuffle();
}

std::size_t BatchStream::batches_per_epoch() const { return windows_.size() / static_cast<std::size_t>(batch_); }

void BatchStream::reset() {
    rng_ = Rng(seed_);
    cursor_ = 0;
    std::sort(windows_.begin(), windows_.end());
    reshuffle();
}

void BatchStream::reshuffle() {
    std::sort(windows_.begin(), windows_.end());
    rng_.shuffle(windows_);
    cursor_ = 0;
}

Batch BatchStream::next() {
    const std::size_t S = static_cast<std::size_t>(context_);
    if (cursor_ + static_cast<std::size_t>(batch_) > windows_.size()) reshuffle();
    Batch b;
    b.batch = batch_;
    b.context = context_;
    b.inputs.reserve(static_cast<std::size_t>(batch_) * S);
    b.targets.reserve(static_cast<std::size_t>(batch_) * S);
    for (int i = 0; i < batch_; ++i) {
        const std::size_t w = windows_[cursor_++];
        for (std::size_t j = 0; j < S; ++j) {
            b.inputs.push_back((*stream_)[w + j]);
            b.targets.push_back((*stream_)[w + j + 1]);
        }
    }
    return b;
}

Batch shuffle_targets(const Batch &batch, std::uint64_t seed) {
    Batch out = batch;
    Rng rng(seed);
    rng.shuffle(out.targets);
    return out;
}

std::string synthetic_text(int groups, int group_len, int count, std::uint64_t seed) {
    if (groups < 1 || group_len < 1 || count < 1) throw std::invalid_argument("synthetic_text: bad arguments");
    Rng rng(seed);
    std::ostringstream os;
    for (int i = 0; i < count; ++i) {
        const int g = static_cast<int>(rng.index(static_cast<std::uint64_t>(groups)));
        for (int j = 0; j < group_len; ++j) {
            os << "w" << g << static_cast<char>('a' + j);
            os << ((i + 1 == count && j + 1 == group_len) ? "" : " ");
        }
        if ((i + 1) % 16 == 0) os << "\n";
    }
    return os.str();
}

}  // namespace ketlab
