#include "macc/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "macc/error.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace macc {

namespace {
thread_local bool t_grad_enabled = true;

#if defined(__GLIBC__)
// Tape buffers are large and short-lived; serving them from the heap instead
// of fresh mmap pages avoids a page-fault storm on every op.
[[maybe_unused]] const bool t_allocator_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
}();
#endif
}  // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Buffer& detail::TensorImpl::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, Buffer data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
    if (requires_grad) impl_->grad_buffer();
}

Tensor::Tensor(Shape shape, const std::vector<double>& data, bool requires_grad)
    : Tensor(std::move(shape), Buffer(data.begin(), data.end()), requires_grad) {}

Tensor::Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad)
    : Tensor(std::move(shape), Buffer(data), requires_grad) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), Buffer(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= impl_->shape.size()) {
        throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(impl_->shape));
    }
    return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<double> Tensor::data() { return impl_->data; }
std::span<const double> Tensor::data() const { return impl_->data; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("tensor: item() on shape " + shape_str(shape()));
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    if (!is_leaf()) throw Error("tensor: requires_grad can only be changed on leaves");
    impl_->requires_grad = on;
    if (on) {
        impl_->grad_buffer();
    } else {
        release_grad();
    }
}

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() { return impl_->grad_buffer(); }

void Tensor::zero_grad() {
    if (has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::release_grad() {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
}

const std::string& Tensor::name() const { return impl_->name; }

Tensor& Tensor::set_name(std::string name) {
    impl_->name = std::move(name);
    return *this;
}

bool Tensor::is_leaf() const { return impl_->node == nullptr; }

Tensor Tensor::clone() const {
    Tensor t(impl_->shape, impl_->data, impl_->requires_grad && is_leaf());
    t.impl_->name = impl_->name;
    return t;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

void Tensor::backward() {
    if (!impl_) throw Error("backward: undefined tensor");
    if (impl_->consumed) throw Error("backward: tape already consumed by a previous backward() call");
    if (numel() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(shape()));
    if (!impl_->requires_grad) throw Error("backward: loss does not depend on any tensor requiring grad");

    // Iterative post-order DFS gives a topological order (inputs before users).
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> seen;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
        auto& [t, next] = stack.back();
        if (t->node && next < t->node->inputs.size()) {
            auto* child = t->node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(t);
            stack.pop_back();
        }
    }

    auto& g = impl_->grad_buffer();
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* t = *it;
        if (t->node) {
            t->grad_buffer();
            t->node->backward(*t);
        }
    }
    for (auto* t : order) {
        if (t->node) {
            t->node.reset();
            t->consumed = true;
            if (t != impl_.get()) {
                t->grad.clear();
                t->grad.shrink_to_fit();
            }
        }
    }
    impl_->consumed = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor detail::make_result(Shape shape, Buffer data,
                           std::vector<std::shared_ptr<TensorImpl>> inputs,
                           std::function<void(const TensorImpl& out)> backward) {
    Tensor out(std::move(shape), std::move(data), false);
    if (!t_grad_enabled) return out;
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const auto& p) { return p->requires_grad; });
    if (!any) return out;
    auto impl = out.impl();
    impl->requires_grad = true;
    impl->node = std::make_shared<Node>(Node{std::move(inputs), std::move(backward)});
    return out;
}

}  // namespace macc
