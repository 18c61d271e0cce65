#include "macc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "macc/binary_io.hpp"
#include "macc/error.hpp"
#include "macc/lhs.hpp"
#include "macc/rng.hpp"

namespace macc {

namespace {
constexpr std::string_view kDatasetMagic = "MACCDS01";
}

Sample Dataset::sample(std::size_t i) const {
    const auto d = shape.d_in, m = shape.image_size(), k = shape.n_sca;
    Sample s;
    s.x.assign(x.begin() + static_cast<std::ptrdiff_t>(i * d), x.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    s.images.assign(images.begin() + static_cast<std::ptrdiff_t>(i * m),
                    images.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
    s.scalars.assign(scalars.begin() + static_cast<std::ptrdiff_t>(i * k),
                     scalars.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
    return s;
}

void Dataset::append(const Sample& s) {
    if (s.x.size() != shape.d_in || s.images.size() != shape.image_size() || s.scalars.size() != shape.n_sca) {
        throw ShapeError("dataset: sample extents do not match dataset shape");
    }
    x.insert(x.end(), s.x.begin(), s.x.end());
    images.insert(images.end(), s.images.begin(), s.images.end());
    scalars.insert(scalars.end(), s.scalars.begin(), s.scalars.end());
    ++size;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.shape = shape;
    out.stats = stats;
    out.split = split;
    out.normalized = normalized;
    for (auto r : rows) {
        if (r >= size) throw Error("dataset: subset row out of range");
        out.append(sample(r));
    }
    return out;
}

NormStats compute_stats(const Dataset& train) {
    if (train.size == 0) throw Error("compute_stats: empty train split");
    const auto k = train.shape.n_sca;
    const auto n = static_cast<double>(train.size);
    NormStats st;
    st.scalar_mean.assign(k, 0.0);
    st.scalar_std.assign(k, 0.0);
    st.clamped.assign(k, false);
    for (std::size_t i = 0; i < train.size; ++i) {
        for (std::size_t c = 0; c < k; ++c) st.scalar_mean[c] += train.scalars[i * k + c];
    }
    for (auto& m : st.scalar_mean) m /= n;
    for (std::size_t i = 0; i < train.size; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            const double d = train.scalars[i * k + c] - st.scalar_mean[c];
            st.scalar_std[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        st.scalar_std[c] = std::sqrt(st.scalar_std[c] / n);
        if (st.scalar_std[c] < kStdClamp) {
            st.scalar_std[c] = kStdClamp;
            st.clamped[c] = true;
        }
    }
    st.image_max = *std::max_element(train.images.begin(), train.images.end());
    if (st.image_max < kStdClamp) st.image_max = kStdClamp;
    return st;
}

Sample normalize(const Sample& s, const NormStats& stats) {
    Sample out = s;
    for (auto& v : out.images) v /= stats.image_max;
    for (std::size_t c = 0; c < out.scalars.size(); ++c) {
        out.scalars[c] = (out.scalars[c] - stats.scalar_mean[c]) / stats.scalar_std[c];
    }
    return out;
}

Sample denormalize(const Sample& s, const NormStats& stats) {
    Sample out = s;
    for (auto& v : out.images) v *= stats.image_max;
    for (std::size_t c = 0; c < out.scalars.size(); ++c) {
        out.scalars[c] = out.scalars[c] * stats.scalar_std[c] + stats.scalar_mean[c];
    }
    return out;
}

Dataset normalized(const Dataset& raw) {
    if (raw.normalized) return raw;
    Dataset out;
    out.shape = raw.shape;
    out.stats = raw.stats;
    out.split = raw.split;
    out.normalized = true;
    out.x.reserve(raw.x.size());
    out.images.reserve(raw.images.size());
    out.scalars.reserve(raw.scalars.size());
    for (std::size_t i = 0; i < raw.size; ++i) out.append(normalize(raw.sample(i), raw.stats));
    return out;
}

DatasetPair generate_dataset(std::size_t n_train, std::size_t n_val, std::uint64_t seed, const SimShape& shape) {
    if (n_train == 0 || n_val == 0) throw Error("generate_dataset: n_train and n_val must be at least 1");
    shape.validate();
    const auto total = n_train + n_val;
    Rng rng(seed);
    const auto design = lhs_sample(total, shape.d_in, rng);
    const auto order = rng.permutation(total);

    DatasetPair pair;
    pair.seed = seed;
    pair.train.shape = pair.val.shape = shape;
    pair.train.split = Split::Train;
    pair.val.split = Split::Val;
    for (std::size_t r = 0; r < total; ++r) {
        std::span<const double> x(design.data() + order[r] * shape.d_in, shape.d_in);
        auto s = simulate(x, shape);
        (r < n_train ? pair.train : pair.val).append(s);
    }
    pair.train.stats = compute_stats(pair.train);
    pair.val.stats = pair.train.stats;
    return pair;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
    if (ds.normalized) throw Error("save_dataset: datasets are persisted unnormalized");
    io::Writer w(path);
    w.magic(kDatasetMagic);
    for (auto v : {ds.size, ds.shape.d_in, ds.shape.n_band, ds.shape.height, ds.shape.width, ds.shape.n_sca}) {
        w.u32(static_cast<std::uint32_t>(v));
    }
    w.f64s(ds.stats.scalar_mean);
    w.f64s(ds.stats.scalar_std);
    w.f64(ds.stats.image_max);
    const auto d = ds.shape.d_in, m = ds.shape.image_size(), k = ds.shape.n_sca;
    for (std::size_t i = 0; i < ds.size; ++i) {
        w.f64s({ds.x.data() + i * d, d});
        w.f64s({ds.images.data() + i * m, m});
        w.f64s({ds.scalars.data() + i * k, k});
    }
    w.finish();
}

Dataset load_dataset(const std::filesystem::path& path, Split split) {
    io::Reader r(path);
    r.expect_magic(kDatasetMagic);
    Dataset ds;
    ds.split = split;
    ds.size = r.u32();
    ds.shape.d_in = r.u32();
    ds.shape.n_band = r.u32();
    ds.shape.height = r.u32();
    ds.shape.width = r.u32();
    ds.shape.n_sca = r.u32();
    const auto d = ds.shape.d_in, m = ds.shape.image_size(), k = ds.shape.n_sca;
    ds.stats.scalar_mean.resize(k);
    ds.stats.scalar_std.resize(k);
    r.f64s(ds.stats.scalar_mean);
    r.f64s(ds.stats.scalar_std);
    ds.stats.image_max = r.f64();
    ds.stats.clamped.resize(k);
    for (std::size_t c = 0; c < k; ++c) ds.stats.clamped[c] = ds.stats.scalar_std[c] <= kStdClamp;
    ds.x.resize(ds.size * d);
    ds.images.resize(ds.size * m);
    ds.scalars.resize(ds.size * k);
    for (std::size_t i = 0; i < ds.size; ++i) {
        r.f64s({ds.x.data() + i * d, d});
        r.f64s({ds.images.data() + i * m, m});
        r.f64s({ds.scalars.data() + i * k, k});
    }
    r.expect_eof();
    return ds;
}

Tensor gather_rows(std::span<const double> table, std::size_t width, std::span<const std::size_t> rows,
                   Shape row_shape) {
    std::vector<double> out(rows.size() * width);
    for (std::size_t b = 0; b < rows.size(); ++b) {
        std::copy_n(table.data() + rows[b] * width, width, out.data() + b * width);
    }
    Shape shape{rows.size()};
    shape.insert(shape.end(), row_shape.begin(), row_shape.end());
    return Tensor(std::move(shape), std::move(out));
}

Batch gather(const Dataset& ds, std::span<const std::size_t> rows) {
    if (rows.empty()) throw Error("gather: empty batch");
    const auto& s = ds.shape;
    return {gather_rows(ds.x, s.d_in, rows, {s.d_in}),
            gather_rows(ds.images, s.image_size(), rows, {s.n_band, s.height, s.width}),
            gather_rows(ds.scalars, s.n_sca, rows, {s.n_sca})};
}

Batch gather_range(const Dataset& ds, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    return gather(ds, rows);
}

Batch gather_all(const Dataset& ds) { return gather_range(ds, 0, ds.size); }

}  // namespace macc
