#pragma once

#include <cstdint>
#include <vector>

#include "ketlab/tensor.hpp"

namespace ketlab {

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled AdamW: weight decay is applied directly to the weights, never
// through the gradient moments. Deterministic given inputs.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg);

    // One bias-corrected update from the current parameter gradients.
    // Gradient clipping, when wanted, must already have been applied.
    void step();
    void zero_grad();

    std::int64_t step_count() const { return step_; }
    const AdamWConfig &config() const { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamWConfig cfg_;
    std::int64_t step_ = 0;
};

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm. Gradients already within the bound are
// left untouched.
double clip_grad_norm(std::vector<Tensor> &params, double max_norm);

}  // namespace ketlab
