#include "macc/layers.hpp"

#include <cmath>
#include <sstream>

#include "macc/error.hpp"

namespace macc {

namespace {

constexpr const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Linear: return "linear";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::ConvTranspose2d: return "conv_transpose2d";
    }
    return "unknown";
}

Tensor named_zeros(Shape shape, const std::string& name) {
    auto t = Tensor::zeros(std::move(shape), true);
    t.set_name(name);
    return t;
}

auto u32(std::size_t v) { return static_cast<std::uint32_t>(v); }

}  // namespace

std::string describe(const LayerDesc& d) {
    std::ostringstream os;
    os << kind_name(d.kind) << '(';
    for (std::size_t i = 0; i < d.extents.size(); ++i) os << (i ? "," : "") << d.extents[i];
    os << ')';
    return os.str();
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.uniform(-limit, limit);
    return Tensor(std::move(shape), std::move(data), true);
}

// Linear

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng)
    : name_(std::move(name)), in_(in), out_(out) {
    weight_ = glorot_uniform({out, in}, in, out, rng);
    weight_.set_name(name_ + ".weight");
    bias_ = named_zeros({out}, name_ + ".bias");
}

Linear::Linear(const Linear& o)
    : name_(o.name_), in_(o.in_), out_(o.out_), weight_(o.weight_.clone()), bias_(o.bias_.clone()) {}

Linear& Linear::operator=(const Linear& o) {
    if (this != &o) *this = Linear(o);
    return *this;
}

Tensor Linear::forward(const Tensor& x) const { return ops::linear(x, weight_, bias_, name_); }

LayerDesc Linear::desc() const { return {LayerKind::Linear, {u32(in_), u32(out_)}}; }

// Conv2d

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, ops::ConvGeometry geometry,
               Rng& rng)
    : name_(std::move(name)), in_(in_channels), out_(out_channels), geometry_(geometry) {
    const auto kk = geometry.kernel * geometry.kernel;
    weight_ = glorot_uniform({out_, in_, geometry.kernel, geometry.kernel}, in_ * kk, out_ * kk, rng);
    weight_.set_name(name_ + ".weight");
    bias_ = named_zeros({out_}, name_ + ".bias");
}

Conv2d::Conv2d(const Conv2d& o)
    : name_(o.name_),
      in_(o.in_),
      out_(o.out_),
      geometry_(o.geometry_),
      weight_(o.weight_.clone()),
      bias_(o.bias_.clone()) {}

Conv2d& Conv2d::operator=(const Conv2d& o) {
    if (this != &o) *this = Conv2d(o);
    return *this;
}

Tensor Conv2d::forward(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != in_) {
        throw ShapeError(name_ + ": expected (N, " + std::to_string(in_) + ", H, W) input, got " +
                         shape_str(x.shape()) + " for weight " + shape_str(weight_.shape()));
    }
    return ops::conv2d(x, weight_, bias_, geometry_, name_);
}

LayerDesc Conv2d::desc() const {
    return {LayerKind::Conv2d,
            {u32(in_), u32(out_), u32(geometry_.kernel), u32(geometry_.stride), u32(geometry_.padding)}};
}

// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::string name, std::size_t in_channels, std::size_t out_channels,
                                 ops::ConvGeometry geometry, Rng& rng)
    : name_(std::move(name)), in_(in_channels), out_(out_channels), geometry_(geometry) {
    const auto kk = geometry.kernel * geometry.kernel;
    weight_ = glorot_uniform({in_, out_, geometry.kernel, geometry.kernel}, in_ * kk, out_ * kk, rng);
    weight_.set_name(name_ + ".weight");
    bias_ = named_zeros({out_}, name_ + ".bias");
}

ConvTranspose2d::ConvTranspose2d(const ConvTranspose2d& o)
    : name_(o.name_),
      in_(o.in_),
      out_(o.out_),
      geometry_(o.geometry_),
      weight_(o.weight_.clone()),
      bias_(o.bias_.clone()) {}

ConvTranspose2d& ConvTranspose2d::operator=(const ConvTranspose2d& o) {
    if (this != &o) *this = ConvTranspose2d(o);
    return *this;
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != in_) {
        throw ShapeError(name_ + ": expected (N, " + std::to_string(in_) + ", H, W) input, got " +
                         shape_str(x.shape()) + " for weight " + shape_str(weight_.shape()));
    }
    return ops::conv_transpose2d(x, weight_, bias_, geometry_, name_);
}

LayerDesc ConvTranspose2d::desc() const {
    return {LayerKind::ConvTranspose2d,
            {u32(in_), u32(out_), u32(geometry_.kernel), u32(geometry_.stride), u32(geometry_.padding),
             u32(geometry_.output_padding)}};
}

// Network

void Network::set_trainable(bool on) const {
    for (auto p : parameters()) p.set_requires_grad(on);
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.numel();
    return n;
}

void Network::copy_parameters_from(const Network& other) const {
    if (descriptors() != other.descriptors()) throw ShapeError("copy_parameters_from: architectures differ");
    auto dst = parameters();
    auto src = other.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        auto d = dst[i].data();
        auto s = src[i].data();
        std::copy(s.begin(), s.end(), d.begin());
    }
}

}  // namespace macc
