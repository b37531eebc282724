#include "ketlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ketlab {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw std::invalid_argument("adamw: lr must be positive");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto &p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0);
    }
}

void AdamW::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor &p = params_[i];
        const double *g = p.grad();
        double *w = p.data();
        double *m = m_[i].data();
        double *v = v_[i].data();
        const std::int64_t n = p.numel();
        for (std::int64_t j = 0; j < n; ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
            w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void AdamW::zero_grad() {
    for (auto &p : params_) p.zero_grad();
}

double clip_grad_norm(std::vector<Tensor> &params, double max_norm) {
    double sq = 0.0;
    for (auto &p : params) {
        const double *g = p.grad();
        const std::int64_t n = p.numel();
        for (std::int64_t j = 0; j < n; ++j) sq += g[j] * g[j];
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto &p : params) {
            double *g = p.grad();
            const std::int64_t n = p.numel();
            for (std::int64_t j = 0; j < n; ++j) g[j] *= s;
        }
    }
    return norm;
}

}  // namespace ketlab
