#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace macc {

using Shape = std::vector<std::size_t>;

/// Allocator with a fixed 64-byte alignment. Vectorized reductions peel a
/// pointer-dependent prefix, so a fixed alignment keeps results bitwise stable.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. `inputs` keeps the operands alive until the tape is
// consumed; `backward` reads the output's grad and accumulates into inputs.
struct Node {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
    Shape shape;
    Buffer data;
    Buffer grad;  // empty until populated
    bool requires_grad = false;
    bool consumed = false;
    std::string name;
    std::shared_ptr<Node> node;

    // Returns the grad buffer, allocating zeros on first use.
    Buffer& grad_buffer();
};

}  // namespace detail

/// Dense row-major float64 array with an optional reverse-mode tape entry.
/// Copies are shallow: two handles may refer to the same storage. Use clone()
/// for an independent copy.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, Buffer data, bool requires_grad = false);
    Tensor(Shape shape, const std::vector<double>& data, bool requires_grad = false);
    Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    bool defined() const { return impl_ != nullptr; }

    std::span<double> data();
    std::span<const double> data() const;
    double item() const;
    double operator[](std::size_t i) const { return impl_->data[i]; }

    bool requires_grad() const;
    /// Leaves only. Turning grad off drops any stored gradient.
    void set_requires_grad(bool on);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();
    void release_grad();

    const std::string& name() const;
    Tensor& set_name(std::string name);

    bool is_leaf() const;
    Tensor clone() const;
    /// Same storage-free copy without tape history.
    Tensor detach() const;

    /// Reverse pass from a scalar. The tape reachable from this tensor is
    /// released afterwards; a second call throws.
    void backward();

    std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Whether new operations are recorded on the tape (thread-local).
bool grad_enabled();

/// Disables tape recording for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

namespace detail {

// Builds an op result. Records a node only when grad mode is on and at least
// one input requires grad.
Tensor make_result(Shape shape, Buffer data,
                   std::vector<std::shared_ptr<TensorImpl>> inputs,
                   std::function<void(const TensorImpl& out)> backward);

}  // namespace detail

}  // namespace macc
