#include "macc/networks.hpp"

#include <string>

#include "macc/error.hpp"

namespace macc {

namespace {

constexpr ops::ConvGeometry kDown{3, 2, 1, 0};
constexpr ops::ConvGeometry kUp{3, 2, 1, 1};

template <class... Layers>
std::vector<Tensor> collect(const Layers&... layers) {
    std::vector<Tensor> out;
    (
        [&] {
            auto p = layers.parameters();
            out.insert(out.end(), p.begin(), p.end());
        }(),
        ...);
    return out;
}

template <class... Layers>
std::vector<LayerDesc> descs(const Layers&... layers) {
    return {layers.desc()...};
}

}  // namespace

void ArchConfig::validate() const {
    shape.validate();
    if (shape.height % 16 != 0 || shape.width % 16 != 0) {
        throw ShapeError("architecture: image extents must be multiples of 16, got " + std::to_string(shape.height) +
                         "x" + std::to_string(shape.width));
    }
    if (latent_dim == 0) throw ShapeError("architecture: latent_dim must be positive");
}

// Encoder

Encoder::Encoder(const ArchConfig& arch, Rng& rng) : arch_(arch) {
    arch.validate();
    const auto& s = arch.shape;
    c1_ = Conv2d("encoder.conv1", s.n_band, 16, kDown, rng);
    c2_ = Conv2d("encoder.conv2", 16, 32, kDown, rng);
    c3_ = Conv2d("encoder.conv3", 32, 64, kDown, rng);
    s1_ = Linear("encoder.sca1", s.n_sca, 32, rng);
    s2_ = Linear("encoder.sca2", 32, 32, rng);
    const auto flat = 64 * (s.height / 8) * (s.width / 8);
    merge_ = Linear("encoder.merge", flat + 32, arch.latent_dim, rng);
}

Tensor Encoder::forward(const Tensor& images, const Tensor& scalars) const {
    auto h = ops::relu(c1_.forward(images));
    h = ops::relu(c2_.forward(h));
    h = ops::flatten(ops::relu(c3_.forward(h)));
    auto s = ops::relu(s2_.forward(ops::relu(s1_.forward(scalars))));
    return ops::tanh(merge_.forward(ops::concat({h, s}, 1)));
}

std::vector<LayerDesc> Encoder::descriptors() const { return descs(c1_, c2_, c3_, s1_, s2_, merge_); }
std::vector<Tensor> Encoder::parameters() const { return collect(c1_, c2_, c3_, s1_, s2_, merge_); }

// Decoder

Decoder::Decoder(const ArchConfig& arch, Rng& rng) : arch_(arch) {
    arch.validate();
    const auto& s = arch.shape;
    bottom_h_ = s.height / 8;
    bottom_w_ = s.width / 8;
    flat_ = 64 * bottom_h_ * bottom_w_;
    expand_ = Linear("decoder.expand", arch.latent_dim, flat_ + 32, rng);
    t1_ = ConvTranspose2d("decoder.deconv1", 64, 32, kUp, rng);
    t2_ = ConvTranspose2d("decoder.deconv2", 32, 16, kUp, rng);
    t3_ = ConvTranspose2d("decoder.deconv3", 16, s.n_band, kUp, rng);
    s1_ = Linear("decoder.sca1", 32, 32, rng);
    s2_ = Linear("decoder.sca2", 32, s.n_sca, rng);
}

Prediction Decoder::forward(const Tensor& z) const {
    if (z.rank() != 2 || z.dim(1) != arch_.latent_dim) {
        throw ShapeError("decoder: expected latent (B, " + std::to_string(arch_.latent_dim) + "), got " +
                         shape_str(z.shape()));
    }
    auto h = ops::relu(expand_.forward(z));
    auto img = ops::reshape(ops::slice(h, 1, 0, flat_), {z.dim(0), 64, bottom_h_, bottom_w_});
    img = ops::relu(t1_.forward(img));
    img = ops::relu(t2_.forward(img));
    img = ops::sigmoid(t3_.forward(img));
    auto sca = s2_.forward(ops::relu(s1_.forward(ops::slice(h, 1, flat_, 32))));
    return {img, sca};
}

std::vector<LayerDesc> Decoder::descriptors() const { return descs(expand_, t1_, t2_, t3_, s1_, s2_); }
std::vector<Tensor> Decoder::parameters() const { return collect(expand_, t1_, t2_, t3_, s1_, s2_); }

// Discriminator

Discriminator::Discriminator(const ArchConfig& arch, Rng& rng)
    : l1_("discriminator.fc1", arch.latent_dim, 64, rng),
      l2_("discriminator.fc2", 64, 64, rng),
      l3_("discriminator.fc3", 64, 1, rng) {}

Tensor Discriminator::forward(const Tensor& z) const {
    auto h = ops::relu(l1_.forward(z));
    h = ops::relu(l2_.forward(h));
    return ops::sigmoid(l3_.forward(h));
}

std::vector<LayerDesc> Discriminator::descriptors() const { return descs(l1_, l2_, l3_); }
std::vector<Tensor> Discriminator::parameters() const { return collect(l1_, l2_, l3_); }

// InverseNet

InverseNet::InverseNet(const ArchConfig& arch, Rng& rng) {
    arch.validate();
    const auto& s = arch.shape;
    c1_ = Conv2d("inverse.conv1", s.n_band, 16, kDown, rng);
    c2_ = Conv2d("inverse.conv2", 16, 32, kDown, rng);
    c3_ = Conv2d("inverse.conv3", 32, 64, kDown, rng);
    c4_ = Conv2d("inverse.conv4", 64, 64, kDown, rng);
    s1_ = Linear("inverse.sca1", s.n_sca, 32, rng);
    const auto flat = 64 * (s.height / 16) * (s.width / 16);
    f1_ = Linear("inverse.fc1", flat + 32, 128, rng);
    f2_ = Linear("inverse.fc2", 128, 64, rng);
    f3_ = Linear("inverse.fc3", 64, 32, rng);
    f4_ = Linear("inverse.fc4", 32, s.d_in, rng);
}

Tensor InverseNet::forward(const Tensor& images, const Tensor& scalars) const {
    auto h = ops::relu(c1_.forward(images));
    h = ops::relu(c2_.forward(h));
    h = ops::relu(c3_.forward(h));
    h = ops::flatten(ops::relu(c4_.forward(h)));
    auto s = ops::relu(s1_.forward(scalars));
    auto m = ops::relu(f1_.forward(ops::concat({h, s}, 1)));
    m = ops::relu(f2_.forward(m));
    m = ops::relu(f3_.forward(m));
    return ops::sigmoid(f4_.forward(m));
}

std::vector<LayerDesc> InverseNet::descriptors() const { return descs(c1_, c2_, c3_, c4_, s1_, f1_, f2_, f3_, f4_); }
std::vector<Tensor> InverseNet::parameters() const { return collect(c1_, c2_, c3_, c4_, s1_, f1_, f2_, f3_, f4_); }

// ForwardNet

ForwardNet::ForwardNet(const ArchConfig& arch, Rng& rng)
    : l1_("forward.fc1", arch.shape.d_in, 128, rng),
      l2_("forward.fc2", 128, 256, rng),
      l3_("forward.fc3", 256, 256, rng),
      l4_("forward.fc4", 256, arch.latent_dim, rng) {}

Tensor ForwardNet::forward(const Tensor& x) const {
    auto h = ops::relu(l1_.forward(x));
    h = ops::relu(l2_.forward(h));
    h = ops::relu(l3_.forward(h));
    return ops::tanh(l4_.forward(h));
}

std::vector<LayerDesc> ForwardNet::descriptors() const { return descs(l1_, l2_, l3_, l4_); }
std::vector<Tensor> ForwardNet::parameters() const { return collect(l1_, l2_, l3_, l4_); }

// BaselineNet

BaselineNet::BaselineNet(const ArchConfig& arch, Rng& rng) : trunk_(arch, rng), head_(arch, rng) {}

Prediction BaselineNet::forward(const Tensor& x) const { return head_.forward(trunk_.forward(x)); }

std::vector<LayerDesc> BaselineNet::descriptors() const {
    auto d = trunk_.descriptors();
    auto h = head_.descriptors();
    d.insert(d.end(), h.begin(), h.end());
    return d;
}

std::vector<Tensor> BaselineNet::parameters() const {
    auto p = trunk_.parameters();
    auto h = head_.parameters();
    p.insert(p.end(), h.begin(), h.end());
    return p;
}

}  // namespace macc
