#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ketlab {

using Shape = std::vector<std::int64_t>;

std::string shape_string(const Shape &shape);

struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, zero-filled
    bool requires_grad = false;
};

// Dense 64-bit tensor handle with shared storage; const on the handle does
// not propagate to the storage, like shared_ptr. Values are row-major.
// Once an op has been recorded against a tensor its values must not be
// mutated until the surrounding Graph has run backward and been dropped;
// the optimizer writes parameters only between steps.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);

    static Tensor scalar(double v);
    static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape &shape() const { return impl_->shape; }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->value.size()); }
    std::int64_t rows() const;
    std::int64_t cols() const;

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    void set_requires_grad(bool v) const { impl_->requires_grad = v; }

    double *data() const { return impl_->value.data(); }
    std::vector<double> &values() const { return impl_->value; }

    // Zero-filled gradient buffer, allocated on first touch.
    double *grad() const;
    std::vector<double> &grad_vec() const;
    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    void zero_grad() const;

    double item() const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Eager tape. Every recorded node is replayed in exact reverse recording
// order by backward(); there is no reordering or fusion, which keeps the
// detach boundary auditable.
class Graph {
public:
    Graph();
    ~Graph();
    Graph(const Graph &) = delete;
    Graph &operator=(const Graph &) = delete;

    static Graph *active();

    void record(std::function<void()> backward_fn);
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape once, newest node first.
    void backward(const Tensor &loss);

private:
    std::vector<std::function<void()>> nodes_;
    Graph *prev_ = nullptr;
    bool ran_backward_ = false;
};

// Suspends recording for the current scope (evaluation, probes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard &) = delete;
    NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
    Graph *saved_;
};

namespace detail {
// True when an op with this requires-grad union should record a node.
bool tracing(bool requires_grad);
}  // namespace detail

}  // namespace ketlab
