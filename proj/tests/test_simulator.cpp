#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "macc/dataset.hpp"
#include "macc/error.hpp"
#include "macc/lhs.hpp"
#include "macc/simulator.hpp"

using namespace macc;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    auto dir = fs::temp_directory_path() / "macc_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Counts points per bin for each column; stratified iff every count is 1.
bool stratified(const std::vector<double>& m, std::size_t n, std::size_t d) {
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<int> count(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = m[i * d + j];
            if (!(v >= 0.0 && v < 1.0)) return false;
            const auto bin = static_cast<std::size_t>(std::floor(v * double(n)));
            if (bin >= n) return false;
            ++count[bin];
        }
        for (int c : count) {
            if (c != 1) return false;
        }
    }
    return true;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(Lhs, SinglePointInUnitInterval) {
    auto m = lhs_sample(1, 1, 3);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_GE(m[0], 0.0);
    EXPECT_LT(m[0], 1.0);
}

TEST(Lhs, FourByTwoHasOnePointPerQuartile) {
    auto m = lhs_sample(4, 2, 11);
    for (std::size_t j = 0; j < 2; ++j) {
        std::set<int> quartiles;
        for (std::size_t i = 0; i < 4; ++i) quartiles.insert(int(m[i * 2 + j] * 4));
        EXPECT_EQ(quartiles, (std::set<int>{0, 1, 2, 3}));
    }
}

TEST(Lhs, SameSeedSameMatrix) { EXPECT_EQ(lhs_sample(50, 3, 9), lhs_sample(50, 3, 9)); }

TEST(Lhs, DifferentSeedsDiffer) { EXPECT_NE(lhs_sample(50, 3, 9), lhs_sample(50, 3, 10)); }

TEST(Lhs, StratifiedUpTo1024By8) {
    for (std::size_t n : {1u, 2u, 3u, 7u, 64u, 100u, 1000u, 1024u}) {
        for (std::size_t d : {1u, 2u, 5u, 8u}) {
            EXPECT_TRUE(stratified(lhs_sample(n, d, n * 31 + d), n, d)) << n << "x" << d;
        }
    }
}

TEST(Lhs, RejectsEmptyDesign) {
    EXPECT_THROW(lhs_sample(0, 2, 1), Error);
    EXPECT_THROW(lhs_sample(2, 0, 1), Error);
}

TEST(Simulator, CenterPointMatchesFormulas) {
    const std::vector<double> x(5, 0.5);
    auto p = latent_physics(x);
    const double amplitude = 0.5 + 1.5 * 0.25;
    const double yield = amplitude * (1 + 9 * sig(20 * (0.25 - 0.5)));
    EXPECT_DOUBLE_EQ(p.amplitude, 0.875);
    EXPECT_NEAR(p.yield, yield, 1e-15);
    EXPECT_NEAR(p.yield, 0.9273, 1e-3);

    SimShape shape;
    auto s = simulate(x, shape);
    EXPECT_NEAR(s.scalars[scalar_index::centroid_u(shape)], 0.5, 1e-12);
    EXPECT_NEAR(s.scalars[scalar_index::centroid_v(shape)], 0.5, 1e-12);
}

TEST(Simulator, SwappingCenterWithUnitAspectTransposesBandZero) {
    SimShape shape;
    const std::vector<double> a{0.3, 0.6, 0.2, 0.9, 0.5}, b{0.3, 0.6, 0.9, 0.2, 0.5};
    auto sa = simulate(a, shape), sb = simulate(b, shape);
    const auto H = shape.height, W = shape.width;
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) EXPECT_NEAR(sa.images[r * W + c], sb.images[c * W + r], 1e-15);
}

TEST(Simulator, IntegralsMatchEmittedImages) {
    SimShape shape;
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> x(5);
        for (auto& v : x) v = rng.uniform();
        auto s = simulate(x, shape);
        const double cell = 1.0 / double(shape.height * shape.width);
        double peak = 0;
        for (std::size_t k = 0; k < shape.n_band; ++k) {
            double sum = 0;
            for (std::size_t p = 0; p < shape.height * shape.width; ++p) {
                const double v = s.images[k * shape.height * shape.width + p];
                EXPECT_GE(v, 0.0);
                sum += v;
                if (k == 0) peak = std::max(peak, v);
            }
            EXPECT_NEAR(s.scalars[k], sum * cell, 1e-9);
        }
        EXPECT_NEAR(s.scalars[scalar_index::peak(shape)], peak, 1e-12);
    }
}

TEST(Simulator, IsPure) {
    const std::vector<double> x{0.1, 0.7, 0.4, 0.5, 0.05};
    auto a = simulate(x), b = simulate(x);
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.scalars, b.scalars);
}

TEST(Simulator, RejectsOutOfRangeInput) {
    EXPECT_THROW(simulate(std::vector<double>{0.5, 0.5, 1.2, 0.5, 0.5}), Error);
    EXPECT_THROW(simulate(std::vector<double>{0.5, 0.5, 0.5}), ShapeError);
}

TEST(Dataset, FileRoundTripsBitwise) {
    auto pair = generate_dataset(10, 5, 123);
    auto path = temp_path("rt_train.bin");
    save_dataset(path, pair.train);
    auto back = load_dataset(path, Split::Train);
    EXPECT_EQ(back.size, 10u);
    EXPECT_EQ(back.x, pair.train.x);
    EXPECT_EQ(back.images, pair.train.images);
    EXPECT_EQ(back.scalars, pair.train.scalars);
    EXPECT_EQ(back.stats, pair.train.stats);
    auto again = temp_path("rt_train2.bin");
    save_dataset(again, back);
    EXPECT_EQ(read_bytes(path), read_bytes(again));
    EXPECT_EQ(read_bytes(path).substr(0, 8), "MACCDS01");
}

TEST(Dataset, NormalizedTrainScalarsAreStandardized) {
    auto pair = generate_dataset(200, 20, 4);
    auto n = normalized(pair.train);
    const auto k = n.shape.n_sca;
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0, var = 0;
        for (std::size_t i = 0; i < n.size; ++i) mean += n.scalars[i * k + j];
        mean /= double(n.size);
        for (std::size_t i = 0; i < n.size; ++i) var += std::pow(n.scalars[i * k + j] - mean, 2);
        EXPECT_NEAR(mean, 0.0, 1e-9);
        EXPECT_NEAR(std::sqrt(var / double(n.size)), 1.0, 1e-9);
    }
    double max = 0;
    for (double v : n.images) max = std::max(max, v);
    EXPECT_DOUBLE_EQ(max, 1.0);
}

TEST(Dataset, ValidationRowsAbsentFromTrain) {
    auto pair = generate_dataset(300, 100, 8);
    std::set<std::vector<double>> seen;
    for (std::size_t i = 0; i < pair.train.size; ++i) {
        auto r = pair.train.x_row(i);
        seen.insert({r.begin(), r.end()});
    }
    for (std::size_t i = 0; i < pair.val.size; ++i) {
        auto r = pair.val.x_row(i);
        EXPECT_FALSE(seen.count({r.begin(), r.end()}));
    }
    EXPECT_EQ(pair.val.stats, pair.train.stats);
}

TEST(Dataset, ConstantColumnIsClampedAndFlagged) {
    Dataset ds;
    for (int i = 0; i < 4; ++i) {
        auto s = simulate(std::vector<double>{0.2 + 0.1 * i, 0.5, 0.5, 0.5, 0.5});
        s.scalars[scalar_index::centroid_u(ds.shape)] = 0.5;
        ds.append(s);
    }
    auto st = compute_stats(ds);
    const auto j = scalar_index::centroid_u(ds.shape);
    EXPECT_TRUE(st.clamped[j]);
    EXPECT_EQ(st.scalar_std[j], kStdClamp);
    ds.stats = st;
    auto n = normalized(ds);
    for (std::size_t i = 0; i < n.size; ++i) EXPECT_EQ(n.scalars[i * n.shape.n_sca + j], 0.0);
}

TEST(Dataset, NormalizeRoundTrip) {
    auto pair = generate_dataset(30, 5, 2);
    Rng rng(3);
    for (int t = 0; t < 5; ++t) {
        auto s = pair.val.sample(rng.below(pair.val.size));
        auto back = denormalize(normalize(s, pair.train.stats), pair.train.stats);
        for (std::size_t i = 0; i < s.images.size(); ++i) EXPECT_NEAR(back.images[i], s.images[i], 1e-12);
        for (std::size_t i = 0; i < s.scalars.size(); ++i) EXPECT_NEAR(back.scalars[i], s.scalars[i], 1e-12);
    }
}

TEST(Dataset, GenerationIsSeedDeterministic) {
    auto a = generate_dataset(20, 5, 77), b = generate_dataset(20, 5, 77);
    EXPECT_EQ(a.train.x, b.train.x);
    EXPECT_EQ(a.val.images, b.val.images);
}

TEST(Dataset, WriteFailureNamesPath) {
    auto pair = generate_dataset(2, 1, 1);
    try {
        save_dataset("/nonexistent-dir/ds.bin", pair.train);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/ds.bin"), std::string::npos);
    }
}

TEST(Dataset, RejectsNormalizedSave) {
    auto pair = generate_dataset(2, 1, 1);
    EXPECT_THROW(save_dataset(temp_path("n.bin"), normalized(pair.train)), Error);
}
