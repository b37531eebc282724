#include "ketlab/neighborhoods.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ketlab {

SimplexSet build_edge_simplices(int S) {
    if (S < 1) throw std::invalid_argument("build_edge_simplices: S must be >= 1");
    SimplexSet set;
    set.length = S;
    set.simplices.reserve(static_cast<std::size_t>(2 * S - 1));
    for (int t = 0; t < S; ++t) set.simplices.push_back({{t}});
    for (int t = 1; t < S; ++t) set.simplices.push_back({{t - 1, t}});
    return set;
}

std::vector<std::size_t> causal_filter(const SimplexSet &set, int t) {
    if (t < 0 || t >= set.length)
        throw std::invalid_argument("causal_filter: t=" + std::to_string(t) + " out of [0," +
                                    std::to_string(set.length) + ")");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < set.simplices.size(); ++i)
        if (set.simplices[i].max_vertex() <= t) out.push_back(i);
    return out;
}

KnnGraph build_fuzzy_knn(const Tensor &z, int k, double tau, bool causal) {
    if (tau <= 0.0) throw std::invalid_argument("build_fuzzy_knn: tau must be positive");
    if (k < 1) throw std::invalid_argument("build_fuzzy_knn: k must be >= 1");
    const std::int64_t S = z.rows(), m = z.cols();
    const double *pz = z.data();
    KnnGraph graph;
    graph.k = k;
    graph.neighbors.resize(static_cast<std::size_t>(S));
    std::vector<std::pair<double, int>> cand;
    for (std::int64_t t = 0; t < S; ++t) {
        cand.clear();
        const std::int64_t limit = causal ? t + 1 : S;
        for (std::int64_t s = 0; s < limit; ++s) {
            const double *a = pz + t * m;
            const double *b = pz + s * m;
            double d2 = 0.0;
            for (std::int64_t c = 0; c < m; ++c) {
                const double diff = a[c] - b[c];
                d2 += diff * diff;
            }
            cand.emplace_back(d2, static_cast<int>(s));
        }
        const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
        std::sort(cand.begin(), cand.end());  // (distance, index): ties go to the lower index
        double mx = -cand[0].first / tau;
        for (std::size_t i = 1; i < keep; ++i) mx = std::max(mx, -cand[i].first / tau);
        double zsum = 0.0;
        auto &row = graph.neighbors[static_cast<std::size_t>(t)];
        row.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            const double w = std::exp(-cand[i].first / tau - mx);
            row.emplace_back(cand[i].second, w);
            zsum += w;
        }
        for (auto &e : row) e.second /= zsum;
    }
    return graph;
}

std::vector<std::uint8_t> causal_mask(int S) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(S) * static_cast<std::size_t>(S), 0);
    for (int t = 0; t < S; ++t)
        for (int s = 0; s <= t; ++s) mask[static_cast<std::size_t>(t) * S + s] = 1;
    return mask;
}

std::vector<std::uint8_t> knn_mask(const KnnGraph &graph, int S) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(S) * static_cast<std::size_t>(S), 0);
    for (int t = 0; t < S && t < static_cast<int>(graph.neighbors.size()); ++t)
        for (const auto &[s, w] : graph.neighbors[static_cast<std::size_t>(t)])
            mask[static_cast<std::size_t>(t) * S + s] = 1;
    return mask;
}

}  // namespace ketlab
