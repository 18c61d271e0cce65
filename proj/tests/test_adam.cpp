#include <gtest/gtest.h>

#include <cmath>

#include "macc/adam.hpp"
#include "macc/error.hpp"
#include "macc/layers.hpp"
#include "macc/ops.hpp"
#include "support.hpp"

using namespace macc;

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
    auto w = Tensor::full({3}, 0.25, true);
    Adam opt({w});
    opt.step();
    EXPECT_EQ(opt.steps(), 1u);
    for (double v : w.data()) EXPECT_EQ(v, 0.25);
}

TEST(Adam, FirstStepWithUnitGradient) {
    AdamConfig cfg;
    auto w = Tensor::full({4}, 1.0, true);
    Adam opt({w}, cfg);
    for (auto& g : w.mutable_grad()) g = 1.0;
    opt.step();
    // Bias-corrected moments are exactly g and g^2 at t = 1.
    const double m_hat = ((1 - cfg.beta1) * 1.0) / (1 - cfg.beta1);
    const double v_hat = ((1 - cfg.beta2) * 1.0) / (1 - cfg.beta2);
    const double expected = 1.0 - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    for (double v : w.data()) {
        EXPECT_DOUBLE_EQ(v, expected);
        EXPECT_NEAR(1.0 - v, 1e-4 / (1 + 1e-8), 1e-15);
    }
    for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
    auto w = Tensor::full({2}, 0.0, true);
    Adam opt({w});
    double prev = 0.0;
    for (int s = 0; s < 2; ++s) {
        w.mutable_grad()[0] = 0.5;
        w.mutable_grad()[1] = 0.5;
        opt.step();
        EXPECT_LT(w.data()[0], prev);
        prev = w.data()[0];
    }
}

TEST(Adam, MissingGradientNamesParameter) {
    auto w = Tensor::full({2}, 0.0, true);
    w.set_name("decoder.expand.weight");
    Adam opt({w});
    w.set_requires_grad(false);
    try {
        opt.step();
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("decoder.expand.weight"), std::string::npos);
    }
    EXPECT_EQ(opt.steps(), 0u);
}

TEST(Adam, MomentShapesMatchParameters) {
    Rng rng(1);
    Linear l("l", 3, 2, rng);
    Adam opt(l.parameters());
    ASSERT_EQ(opt.first_moments().size(), 2u);
    EXPECT_EQ(opt.first_moments()[0].size(), 6u);
    EXPECT_EQ(opt.second_moments()[1].size(), 2u);
}

TEST(Adam, SameSeedSameSequenceIsBitwiseIdentical) {
    auto run = [] {
        Rng rng(42);
        Linear l("l", 4, 3, rng);
        Adam opt(l.parameters());
        Rng data(7);
        for (int s = 0; s < 25; ++s) {
            auto x = macc::testing::random_tensor({8, 4}, data);
            auto t = macc::testing::random_tensor({8, 3}, data);
            ops::mse(l.forward(x), t).backward();
            opt.step();
        }
        std::vector<double> out;
        for (auto& p : l.parameters()) out.insert(out.end(), p.data().begin(), p.data().end());
        return out;
    };
    EXPECT_EQ(run(), run());
}
