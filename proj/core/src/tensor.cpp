#include "ketlab/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace ketlab {

namespace {
Graph *g_active = nullptr;

std::int64_t shape_numel(const Shape &shape) {
    std::int64_t n = 1;
    for (auto e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor: extents must be positive, got " + shape_string(shape));
        n *= e;
    }
    return n;
}
}  // namespace

std::string shape_string(const Shape &shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<TensorImpl>()) {
    const std::int64_t n = shape_numel(shape);
    impl_->shape = std::move(shape);
    impl_->value.assign(static_cast<std::size_t>(n), 0.0);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v) {
    Tensor t(Shape{1});
    t.data()[0] = v;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("tensor: " + shape_string(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    Tensor t;
    t.impl_ = std::make_shared<TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->value = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
}

std::int64_t Tensor::rows() const {
    if (impl_->shape.size() != 2) throw std::logic_error("tensor: rows() needs rank 2, got " + shape_string(impl_->shape));
    return impl_->shape[0];
}

std::int64_t Tensor::cols() const {
    if (impl_->shape.size() != 2) throw std::logic_error("tensor: cols() needs rank 2, got " + shape_string(impl_->shape));
    return impl_->shape[1];
}

double *Tensor::grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
    return impl_->grad.data();
}

std::vector<double> &Tensor::grad_vec() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() const {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("tensor: item() needs a scalar, got " + shape_string(impl_->shape));
    return impl_->value[0];
}

Graph::Graph() : prev_(g_active) { g_active = this; }

Graph::~Graph() { g_active = prev_; }

Graph *Graph::active() { return g_active; }

void Graph::record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

void Graph::backward(const Tensor &loss) {
    if (ran_backward_) throw std::logic_error("graph: backward already ran on this tape");
    if (loss.numel() != 1) throw std::invalid_argument("graph: backward needs a scalar loss");
    ran_backward_ = true;
    Tensor seed = loss;
    seed.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

NoGradGuard::NoGradGuard() : saved_(g_active) { g_active = nullptr; }

NoGradGuard::~NoGradGuard() { g_active = saved_; }

namespace detail {
bool tracing(bool requires_grad) { return requires_grad && g_active != nullptr; }
}  // namespace detail

}  // namespace ketlab
