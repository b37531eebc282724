#pragma once

#include <cstdint>
#include <vector>

#include "ketlab/tensor.hpp"

namespace ketlab {

// A simplex is a strictly increasing tuple of token positions;
// dimension = arity - 1. Only dimensions 0 and 1 are built here, but the
// representation carries arbitrary arity.
struct Simplex {
    std::vector<int> vertices;
    int max_vertex() const { return vertices.back(); }
    int dimension() const { return static_cast<int>(vertices.size()) - 1; }
};

struct SimplexSet {
    int length = 0;  // S
    std::vector<Simplex> simplices;

    std::size_t size() const { return simplices.size(); }
};

// All S tokens plus the S-1 adjacent edges (t-1, t); |set| == 2S - 1.
// Tokens come first (index t), then edges (index S + e for edge (e, e+1)).
SimplexSet build_edge_simplices(int S);

// Indices of the simplices with max vertex <= t.
std::vector<std::size_t> causal_filter(const SimplexSet &set, int t);

// Per-target neighbor lists with row-stochastic fuzzy weights.
struct KnnGraph {
    int k = 0;
    // neighbors[t] = (source, weight); weights sum to 1 per target
    std::vector<std::vector<std::pair<int, double>>> neighbors;
};

// k nearest sources per target by Euclidean distance in z-space (self
// included), weighted by softmax(-dist^2 / tau) over the retained set.
// Ties break toward the lower source index; causal mode keeps only s <= t.
KnnGraph build_fuzzy_knn(const Tensor &z, int k, double tau, bool causal);

// Boolean S x S mask, allowed iff source <= target (row-major, row =
// target). Standard causal attention mask.
std::vector<std::uint8_t> causal_mask(int S);

// Membership mask of the kNN graph as an S x S row-major boolean array.
std::vector<std::uint8_t> knn_mask(const KnnGraph &graph, int S);

}  // namespace ketlab
