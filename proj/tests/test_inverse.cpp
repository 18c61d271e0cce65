#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "macc/error.hpp"
#include "macc/inverse.hpp"
#include "support.hpp"
#include "tiny.hpp"

using namespace macc;
using namespace macc::testing;

namespace {

struct Nets {
    ArchConfig arch = tiny_arch();
    Rng rng{31};
    InverseNet g{arch, rng};
    ForwardNet f{arch, rng};
    Decoder d{arch, rng};
};

}  // namespace

TEST(InverseLoss, ObjectiveDecomposesAndMatchesOracles) {
    Nets n;
    Rng data(2);
    auto z = random_tensor({4, 6}, data);
    auto x = random_tensor({4, 5}, data, 0, 1);
    for (double lambda : {0.0, 0.05, 1.0, 10.0}) {
        auto t = inverse_loss(n.g, n.f, n.d, z, x, lambda);
        EXPECT_NEAR(t.total.item(), t.regression.item() + lambda * t.cycle.item(), 1e-10);
        NoGradGuard guard;
        auto xr = n.g.forward(n.d.forward(z));
        auto zr = n.f.forward(xr);
        EXPECT_NEAR(t.regression.item(), loop_mse(xr.data(), x.data()), 1e-12);
        EXPECT_NEAR(t.cycle.item(), loop_sse(zr.data(), z.data()), 1e-12);
    }
}

TEST(InverseLoss, CachedDecodingGivesIdenticalTerms) {
    Nets n;
    Rng data(3);
    auto z = random_tensor({3, 6}, data);
    auto x = random_tensor({3, 5}, data, 0, 1);
    auto decoded = n.d.forward(z);
    auto a = inverse_loss(n.g, n.f, decoded, z, x, 0.05);
    auto b = inverse_loss(n.g, n.f, n.d, z, x, 0.05);
    EXPECT_EQ(a.total.item(), b.total.item());
}

TEST(InverseLoss, FrozenForwardAndDecoderReceiveNoGradient) {
    Nets n;
    n.f.set_trainable(false);
    n.d.set_trainable(false);
    Rng data(4);
    auto z = random_tensor({3, 6}, data);
    auto x = random_tensor({3, 5}, data, 0, 1);
    inverse_loss(n.g, n.f, n.d, z, x, 0.5).total.backward();
    for (auto& p : n.f.parameters()) EXPECT_FALSE(p.has_grad());
    for (auto& p : n.d.parameters()) EXPECT_FALSE(p.has_grad());
    double norm = 0;
    for (auto& p : n.g.parameters())
        for (double v : p.grad()) norm += v * v;
    EXPECT_GT(norm, 0.0);
}

TEST(InverseLoss, GradientMatchesFiniteDifferences) {
    Nets n;
    n.d.set_trainable(false);
    Rng data(5);
    auto z = random_tensor({2, 6}, data);
    auto x = random_tensor({2, 5}, data, 0, 1);
    auto params = n.g.parameters();
    // Output layer weights and bias of the inverse plus the last forward bias.
    std::vector<Tensor> wrt{params[params.size() - 2], params.back(), n.f.parameters().back()};
    const double err = gradient_error([&] { return inverse_loss(n.g, n.f, n.d, z, x, 0.3).total; }, wrt);
    EXPECT_LT(err, 1e-4);
}

TEST(Bootstrap, SubsetSizeOrderAndDeterminism) {
    for (double f : {0.01, 0.1, 0.25, 0.5, 0.999, 1.0}) {
        auto s = bootstrap_subset(200, f, 9);
        EXPECT_EQ(s.size(), std::clamp<std::size_t>(std::llround(f * 200), 1, 200));
        EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
        EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), s.size());
        EXPECT_LT(s.back(), 200u);
        EXPECT_EQ(s, bootstrap_subset(200, f, 9));
    }
    EXPECT_NE(bootstrap_subset(200, 0.5, 1), bootstrap_subset(200, 0.5, 2));
    EXPECT_EQ(bootstrap_subset(3, 1e-6, 0).size(), 1u);
    EXPECT_THROW(bootstrap_subset(10, 0.0, 0), ConfigError);
    EXPECT_THROW(bootstrap_subset(10, 1.5, 0), ConfigError);
}

TEST(Pretraining, ImprovesAndIsDeterministic) {
    auto data = tiny_data();
    auto opts = tiny_options(4, 11);
    auto a = pretrain_inverse(data.train, data.val, tiny_arch(), opts);
    auto b = pretrain_inverse(data.train, data.val, tiny_arch(), opts);
    EXPECT_LT(a.log.value(a.best_epoch, "val_mse"), a.log.value(0, "val_mse"));
    EXPECT_TRUE(a.log.same_values(b.log));
    EXPECT_EQ(flat_params(a.net), flat_params(b.net));
    EXPECT_NEAR(inverse_mse(a.net, data.val), a.log.value(a.best_epoch, "val_mse"), 1e-12);
    auto pred = inverse_predict_dataset(a.net, data.val);
    EXPECT_NEAR(loop_mse(pred, data.val.x), inverse_mse(a.net, data.val), 1e-12);
}

TEST(Ensemble, FullFractionMemberEqualsStandardPretraining) {
    auto data = tiny_data();
    auto opts = tiny_options(2, 13);
    auto single = pretrain_inverse(data.train, data.val, tiny_arch(), opts);
    auto ens = bootstrap_inverses(data.train, data.val, tiny_arch(), opts, 1.0, {13});
    ASSERT_EQ(ens.members.size(), 1u);
    EXPECT_EQ(ens.members[0].subset_size, data.train.size);
    EXPECT_EQ(flat_params(ens.members[0].net), flat_params(single.net));
}

TEST(Ensemble, ThreadCountDoesNotChangeMembers) {
    auto data = tiny_data();
    auto opts = tiny_options(1);
    const std::vector<std::uint64_t> seeds{3, 4, 5};
    auto serial = bootstrap_inverses(data.train, data.val, tiny_arch(), opts, 0.5, seeds, 1);
    auto parallel = bootstrap_inverses(data.train, data.val, tiny_arch(), opts, 0.5, seeds, 3);
    ASSERT_EQ(parallel.members.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(serial.members[i].seed, seeds[i]);
        EXPECT_EQ(serial.members[i].subset_size, 24u);
        EXPECT_EQ(flat_params(serial.members[i].net), flat_params(parallel.members[i].net));
    }
    EXPECT_NE(flat_params(serial.members[0].net), flat_params(serial.members[1].net));
}

TEST(Manifest, RoundTripAndLineAnchoredErrors) {
    auto dir = temp_dir("manifest");
    std::vector<ManifestRecord> recs{{0, "ensemble_member_0.ckpt", 3000, 0.5, 1000},
                                     {1, "ensemble_member_1.ckpt", 3001, 0.5, 1000}};
    write_manifest(dir / "m.txt", recs);
    auto back = read_manifest(dir / "m.txt");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].checkpoint, "ensemble_member_1.ckpt");
    EXPECT_EQ(back[1].seed, 3001u);
    EXPECT_EQ(back[1].fraction, 0.5);
    EXPECT_EQ(back[1].subset_size, 1000u);

    std::ofstream(dir / "bad.txt") << "member=0 checkpoint=a seed=1 fraction=0.5 subset_size=2\nmember=1 seed=x\n";
    try {
        read_manifest(dir / "bad.txt");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.txt:2:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(read_manifest(dir / "absent.txt"), IoError);
}
