#include <gtest/gtest.h>

#include <cmath>

#include "macc/error.hpp"
#include "macc/layers.hpp"
#include "macc/ops.hpp"
#include "support.hpp"

using namespace macc;
using macc::testing::gradient_error;
using macc::testing::random_tensor;
using macc::testing::random_tensor_off_zero;

namespace {

constexpr double kGradTol = 1e-4;
constexpr int kInstances = 20;

// Direct-sum reference convolution, NCHW / OCkk.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, const ops::ConvGeometry& g) {
    const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2);
    const auto oh = ops::conv_out_extent(h, g), ow = ops::conv_out_extent(wd, g);
    std::vector<double> out(n * o * oh * ow);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t q = 0; q < o; ++q)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double acc = b.data()[q];
                    for (std::size_t ch = 0; ch < c; ++ch)
                        for (std::size_t u = 0; u < k; ++u)
                            for (std::size_t v = 0; v < k; ++v) {
                                const long r = long(i * g.stride + u) - long(g.padding);
                                const long cc = long(j * g.stride + v) - long(g.padding);
                                if (r < 0 || cc < 0 || r >= long(h) || cc >= long(wd)) continue;
                                acc += x.data()[((s * c + ch) * h + r) * wd + cc] * w.data()[((q * c + ch) * k + u) * k + v];
                            }
                    out[((s * o + q) * oh + i) * ow + j] = acc;
                }
    return out;
}

// Scatter reference for the transposed convolution: every input pixel adds
// its weighted kernel into the (stride-dilated) output.
std::vector<double> conv_transpose_oracle(const Tensor& x, const Tensor& w, const Tensor& b,
                                          const ops::ConvGeometry& g) {
    const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(1), k = w.dim(2);
    const auto oh = ops::conv_transpose_out_extent(h, g), ow = ops::conv_transpose_out_extent(wd, g);
    std::vector<double> out(n * o * oh * ow);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t q = 0; q < o; ++q)
            for (std::size_t p = 0; p < oh * ow; ++p) out[(s * o + q) * oh * ow + p] = b.data()[q];
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < wd; ++j)
                    for (std::size_t q = 0; q < o; ++q)
                        for (std::size_t u = 0; u < k; ++u)
                            for (std::size_t v = 0; v < k; ++v) {
                                const long r = long(i * g.stride + u) - long(g.padding);
                                const long cc = long(j * g.stride + v) - long(g.padding);
                                if (r < 0 || cc < 0 || r >= long(oh) || cc >= long(ow)) continue;
                                out[((s * o + q) * oh + r) * ow + cc] +=
                                    x.data()[((s * c + ch) * h + i) * wd + j] * w.data()[((ch * o + q) * k + u) * k + v];
                            }
    return out;
}

}  // namespace

TEST(Conv, IdentityKernelReproducesInput) {
    Rng rng(1);
    auto x = random_tensor({1, 1, 4, 5}, rng);
    auto y = ops::conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor({1}, {0.0}), {1, 1, 0, 0});
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv, AveragingKernelOnConstantInterior) {
    auto x = Tensor::full({1, 1, 5, 5}, 7.0);
    auto w = Tensor::full({1, 1, 3, 3}, 1.0 / 9.0);
    auto y = ops::conv2d(x, w, Tensor({1}, {0.0}), {3, 1, 1, 0});
    auto ref = conv_oracle(x, w, Tensor({1}, {0.0}), {3, 1, 1, 0});
    EXPECT_NEAR(y.data()[2 * 5 + 2], 7.0, 1e-12);
    EXPECT_NEAR(ref[2 * 5 + 2], 7.0, 1e-12);
}

TEST(Conv, MatchesDirectSumOracle) {
    Rng rng(2);
    for (auto g : {ops::ConvGeometry{3, 1, 0, 0}, ops::ConvGeometry{3, 2, 1, 0}, ops::ConvGeometry{2, 2, 0, 0}}) {
        auto x = random_tensor({2, 3, 7, 6}, rng);
        auto w = random_tensor({4, 3, g.kernel, g.kernel}, rng);
        auto b = random_tensor({4}, rng);
        auto y = ops::conv2d(x, w, b, g);
        auto ref = conv_oracle(x, w, b, g);
        ASSERT_EQ(y.numel(), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-12);
    }
}

TEST(ConvTranspose, MatchesScatterOracle) {
    Rng rng(3);
    for (auto g : {ops::ConvGeometry{3, 2, 1, 1}, ops::ConvGeometry{3, 1, 0, 0}, ops::ConvGeometry{2, 2, 0, 0}}) {
        auto x = random_tensor({2, 3, 4, 3}, rng);
        auto w = random_tensor({3, 2, g.kernel, g.kernel}, rng);
        auto b = random_tensor({2}, rng);
        auto y = ops::conv_transpose2d(x, w, b, g);
        auto ref = conv_transpose_oracle(x, w, b, g);
        ASSERT_EQ(y.numel(), ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-12);
    }
}

TEST(Conv, StrideTwoRoundTripRestoresExtent) {
    const ops::ConvGeometry down{3, 2, 1, 0}, up{3, 2, 1, 1};
    for (std::size_t n : {8u, 16u, 32u, 64u}) {
        EXPECT_EQ(ops::conv_transpose_out_extent(ops::conv_out_extent(n, down), up), n);
    }
    Rng rng(4);
    Conv2d c("c", 2, 3, down, rng);
    ConvTranspose2d t("t", 3, 2, up, rng);
    auto x = random_tensor({1, 2, 16, 8}, rng);
    EXPECT_EQ(t.forward(c.forward(x)).shape(), x.shape());
}

TEST(Conv, ShapeErrorNamesLayerAndShapes) {
    Rng rng(5);
    Conv2d c("encoder.conv1", 4, 16, {3, 2, 1, 0}, rng);
    try {
        c.forward(Tensor::zeros({1, 3, 8, 8}));
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("encoder.conv1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[1, 3, 8, 8]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[16, 4, 3, 3]"), std::string::npos) << msg;
    }
}

TEST(Linear, ShapeErrorNamesLayer) {
    Rng rng(6);
    Linear l("decoder.expand", 4, 3, rng);
    try {
        l.forward(Tensor::zeros({2, 5}));
        FAIL();
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("decoder.expand"), std::string::npos);
    }
}

TEST(Activations, ReluDefinition) {
    auto y = ops::relu(Tensor({3}, {-1.0, 0.0, 2.0}));
    EXPECT_EQ(y.data()[0], 0.0);
    EXPECT_EQ(y.data()[1], 0.0);
    EXPECT_EQ(y.data()[2], 2.0);
}

TEST(Activations, SigmoidIsStableAtExtremes) {
    auto y = ops::sigmoid(Tensor({3}, {-800.0, 0.0, 800.0}));
    EXPECT_EQ(y.data()[0], 0.0);
    EXPECT_EQ(y.data()[1], 0.5);
    EXPECT_EQ(y.data()[2], 1.0);
}

TEST(Losses, MseClosedForms) {
    EXPECT_EQ(ops::mse(Tensor({2}, {1, 2}), Tensor({2}, {1, 2})).item(), 0.0);
    EXPECT_EQ(ops::mse(Tensor({2}, {0, 0}), Tensor({2}, {1, 1})).item(), 1.0);
    EXPECT_THROW(ops::mse(Tensor({2}, {0, 0}), Tensor({3}, {1, 1, 1})), ShapeError);
}

TEST(Losses, MseMatchesLoopOracle) {
    Rng rng(7);
    for (int r = 0; r < 10; ++r) {
        auto a = random_tensor({4}, rng), b = random_tensor({4}, rng);
        EXPECT_NEAR(ops::mse(a, b).item(), macc::testing::loop_mse(a.data(), b.data()), 1e-15);
    }
}

TEST(Losses, BceClosedForms) {
    EXPECT_NEAR(ops::bce(Tensor({1}, {0.5}), 1.0).item(), std::log(2.0), 1e-15);
    EXPECT_NEAR(ops::bce(Tensor({1}, {1.0 - 1e-7}), 1.0).item(), 1e-7, 1e-12);
    // Exact 0 and 1 are clamped, not infinite.
    EXPECT_NEAR(ops::bce(Tensor({1}, {0.0}), 1.0).item(), -std::log(1e-7), 1e-9);
}

TEST(Losses, BatchBceMatchesPerElementOracle) {
    Rng rng(8);
    auto p = random_tensor({8, 1}, rng, 0.01, 0.99);
    std::vector<double> y(8);
    double ref = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
        ref += macc::testing::loop_bce(p.data()[i], y[i]) / 8.0;
    }
    EXPECT_NEAR(ops::bce(p, Tensor({8, 1}, y)).item(), ref, 1e-12);
}

// Gradient checks: each layer kind and each loss kind on 20 random instances
// of at most 64 elements per tensor.

TEST(GradCheck, Linear) {
    Rng rng(11);
    for (int r = 0; r < kInstances; ++r) {
        auto x = random_tensor({3, 4}, rng, -1, 1, true);
        auto w = random_tensor({5, 4}, rng, -1, 1, true);
        auto b = random_tensor({5}, rng, -1, 1, true);
        auto t = random_tensor({3, 5}, rng);
        auto loss = [&] { return ops::mse(ops::linear(x, w, b), t); };
        EXPECT_LT(gradient_error(loss, {x, w, b}), kGradTol);
    }
}

TEST(GradCheck, Conv2d) {
    Rng rng(12);
    for (int r = 0; r < kInstances; ++r) {
        const std::size_t s = 1 + r % 2, p = r % 2;
        const ops::ConvGeometry g{3, s, p, 0};
        auto x = random_tensor({2, 2, 4, 4}, rng, -1, 1, true);
        auto w = random_tensor({3, 2, 3, 3}, rng, -1, 1, true);
        auto b = random_tensor({3}, rng, -1, 1, true);
        auto y = ops::conv2d(x, w, b, g);
        auto t = random_tensor(y.shape(), rng);
        auto loss = [&] { return ops::mse(ops::conv2d(x, w, b, g), t); };
        EXPECT_LT(gradient_error(loss, {x, w, b}), kGradTol);
    }
}

TEST(GradCheck, ConvTranspose2d) {
    Rng rng(13);
    for (int r = 0; r < kInstances; ++r) {
        const ops::ConvGeometry g = r % 2 ? ops::ConvGeometry{3, 2, 1, 1} : ops::ConvGeometry{3, 1, 0, 0};
        auto x = random_tensor({2, 2, 3, 3}, rng, -1, 1, true);
        auto w = random_tensor({2, 3, 3, 3}, rng, -1, 1, true);
        auto b = random_tensor({3}, rng, -1, 1, true);
        auto y = ops::conv_transpose2d(x, w, b, g);
        auto t = random_tensor(y.shape(), rng);
        auto loss = [&] { return ops::mse(ops::conv_transpose2d(x, w, b, g), t); };
        EXPECT_LT(gradient_error(loss, {x, w, b}), kGradTol);
    }
}

TEST(GradCheck, Activations) {
    Rng rng(14);
    for (int r = 0; r < kInstances; ++r) {
        auto x = random_tensor_off_zero({4, 6}, rng);
        auto t = random_tensor({4, 6}, rng);
        EXPECT_LT(gradient_error([&] { return ops::mse(ops::relu(x), t); }, {x}), kGradTol);
        EXPECT_LT(gradient_error([&] { return ops::mse(ops::sigmoid(x), t); }, {x}), kGradTol);
        EXPECT_LT(gradient_error([&] { return ops::mse(ops::tanh(x), t); }, {x}), kGradTol);
    }
}

TEST(GradCheck, StructuralOps) {
    Rng rng(15);
    for (int r = 0; r < kInstances; ++r) {
        auto a = random_tensor({2, 3, 2, 2}, rng, -1, 1, true);
        auto b = random_tensor({2, 5}, rng, -1, 1, true);
        auto t = random_tensor({2, 17}, rng);
        auto loss = [&] {
            auto joined = ops::concat({ops::flatten(a), b}, 1);
            auto part = ops::slice(joined, 1, 3, 12);
            auto back = ops::reshape(part, {2, 3, 2, 2});
            auto mixed = ops::add(ops::scale(back, 1.7), ops::mul(a, back));
            return ops::add(ops::mse(ops::concat({ops::flatten(mixed), ops::sub(b, b)}, 1), t), ops::mean(a));
        };
        EXPECT_LT(gradient_error(loss, {a, b}), kGradTol);
    }
}

TEST(GradCheck, Losses) {
    Rng rng(16);
    for (int r = 0; r < kInstances; ++r) {
        auto p = random_tensor({6, 1}, rng, 0.05, 0.95, true);
        std::vector<double> y(6);
        for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        Tensor labels({6, 1}, y);
        EXPECT_LT(gradient_error([&] { return ops::bce(p, labels); }, {p}), kGradTol);
        EXPECT_LT(gradient_error([&] { return ops::bce(p, 1.0); }, {p}), kGradTol);

        auto a = random_tensor({3, 4}, rng, -1, 1, true);
        auto b = random_tensor({3, 4}, rng, -1, 1, true);
        EXPECT_LT(gradient_error([&] { return ops::mse(a, b); }, {a, b}), kGradTol);
        EXPECT_LT(gradient_error([&] { return ops::sse(a, b); }, {a, b}), kGradTol);
    }
}

TEST(GradCheck, MseOfSigmoidLinear) {
    Rng rng(17);
    for (int r = 0; r < kInstances; ++r) {
        auto w = random_tensor({3, 4}, rng, -1, 1, true);
        auto x = random_tensor({5, 4}, rng);
        auto y = random_tensor({5, 3}, rng, 0, 1);
        auto zero = Tensor::zeros({3});
        EXPECT_LT(gradient_error([&] { return ops::mse(ops::sigmoid(ops::linear(x, w, zero)), y); }, {w}), kGradTol);
    }
}
