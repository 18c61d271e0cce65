#include "macc/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "macc/adam.hpp"
#include "macc/error.hpp"
#include "macc/inverse.hpp"

namespace macc {

namespace {

constexpr std::size_t kEvalChunk = 250;

struct DecodedCache {
    std::vector<double> images, scalars;
};

DecodedCache decode_table(const Decoder& d, const std::vector<double>& z, std::size_t latent_dim) {
    NoGradGuard guard;
    DecodedCache out;
    const auto n = z.size() / latent_dim;
    for (std::size_t b = 0; b < n; b += kEvalChunk) {
        const auto m = std::min(n, b + kEvalChunk) - b;
        Tensor zb({m, latent_dim}, std::vector<double>(z.begin() + b * latent_dim, z.begin() + (b + m) * latent_dim));
        auto y = d.forward(zb);
        out.images.insert(out.images.end(), y.images.data().begin(), y.images.data().end());
        out.scalars.insert(out.scalars.end(), y.scalars.data().begin(), y.scalars.data().end());
    }
    return out;
}

struct ValScore {
    double regression = 0;
    double image = 0;
};

ValScore score_val(const ForwardNet& f, const Decoder& d, const Dataset& val, const std::vector<double>& z,
                   std::size_t latent_dim) {
    NoGradGuard guard;
    double reg = 0, img = 0;
    for (std::size_t b = 0; b < val.size; b += kEvalChunk) {
        const auto e = std::min(val.size, b + kEvalChunk);
        auto batch = gather_range(val, b, e);
        auto zh = f.forward(batch.x);
        Tensor zb({e - b, latent_dim}, std::vector<double>(z.begin() + b * latent_dim, z.begin() + e * latent_dim));
        reg += ops::sse(zh, zb).item();
        img += ops::sse(d.forward(zh).images, batch.images).item();
    }
    return {reg / double(val.size * latent_dim), img / double(val.size * val.shape.image_size())};
}

}  // namespace

CyclePenalty cycle_penalty(const ForwardNet& f, const InverseNet& g, const Decoder& d, const Tensor& x,
                           const Tensor& z, const Prediction& decoded_z) {
    if (x.dim(0) == 0) throw Error("cycle_penalty: empty batch");
    CyclePenalty p;
    p.latent = ops::sse(z, f.forward(g.forward(decoded_z)));
    p.input = ops::sse(x, g.forward(d.forward(f.forward(x))));
    p.total = ops::add(p.latent, p.input);
    return p;
}

CyclePenalty cycle_penalty(const ForwardNet& f, const InverseNet& g, const Decoder& d, const Tensor& x,
                           const Tensor& z) {
    return cycle_penalty(f, g, d, x, z, d.forward(z));
}

SurrogateLossTerms surrogate_loss(const ForwardNet& f, const InverseNet& g, const Decoder& d, const Tensor& x,
                                  const Tensor& z, const Prediction& decoded_z, double lambda_cyc) {
    SurrogateLossTerms t;
    t.regression = ops::mse(f.forward(x), z);
    t.penalty = cycle_penalty(f, g, d, x, z, decoded_z);
    t.total = ops::add(t.regression, ops::scale(t.penalty.total, lambda_cyc));
    return t;
}

Prediction predict_outputs(const ForwardNet& f, const Decoder& d, const Tensor& x) { return d.forward(f.forward(x)); }

SurrogateResult train_surrogate(const Dataset& train, const Dataset& val, const WaeModel& wae,
                                const InverseNet& pretrained_inverse, const SurrogateConfig& config) {
    if (!(config.lambda_cyc >= 0)) throw ConfigError("train-surrogate: lambda_cyc must be >= 0");
    if (!train.normalized || !val.normalized) throw Error("train-surrogate: datasets must be normalized");
    const auto& opt = config.train;
    const auto& s = train.shape;
    const auto latent_dim = wae.arch.latent_dim;
    const double lambda = config.lambda_cyc;
    Stopwatch clock;

    Rng init(derive_seed(opt.seed, 0));
    ForwardNet f(wae.arch, init);
    InverseNet g = pretrained_inverse;
    Rng shuffle(derive_seed(opt.seed, 1));

    // Private copy of the decoder so freezing it never touches the caller's model.
    Decoder d = wae.decoder;
    d.set_trainable(false);

    const auto z_train = encode_dataset(wae, train);
    const auto z_val = encode_dataset(wae, val);
    const auto decoded = decode_table(d, z_train, latent_dim);

    Adam f_opt(f.parameters(), opt.adam);
    Adam g_opt(g.parameters(), opt.adam);

    TrainingLog log({"epoch", "regression", "latent_cycle", "input_cycle", "total", "inverse_regression",
                     "inverse_total", "val_regression", "val_image"});
    EarlyStopper stopper(opt.patience);
    std::optional<ForwardNet> best_f;
    std::optional<InverseNet> best_g;
    std::optional<int> diverged;

    auto record = [&](int epoch, std::vector<double> terms) {
        auto v = score_val(f, d, val, z_val, latent_dim);
        terms.insert(terms.begin(), double(epoch));
        terms.push_back(v.regression);
        terms.push_back(v.image);
        log.add(std::move(terms), clock.seconds());
        if (stopper.update(v.regression, epoch)) {
            best_f = f;
            best_g = g;
        }
    };

    auto batch_tensors = [&](std::span<const std::size_t> rows) {
        struct {
            Tensor x, z;
            Prediction dz;
        } b{gather_rows(train.x, s.d_in, rows, {s.d_in}), gather_rows(z_train, latent_dim, rows, {latent_dim}),
            {gather_rows(decoded.images, s.image_size(), rows, {s.n_band, s.height, s.width}),
             gather_rows(decoded.scalars, s.n_sca, rows, {s.n_sca})}};
        return b;
    };

    {
        NoGradGuard guard;
        std::vector<double> acc(6, 0.0);
        std::vector<std::size_t> all(train.size);
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        for (auto rows : make_batches(all, kEvalChunk)) {
            auto b = batch_tensors(rows);
            auto t = surrogate_loss(f, g, d, b.x, b.z, b.dz, lambda);
            auto it = inverse_loss(g, f, b.dz, b.z, b.x, lambda);
            const double w = double(rows.size());
            acc[0] += w * t.regression.item();
            acc[1] += t.penalty.latent.item();
            acc[2] += t.penalty.input.item();
            acc[4] += w * it.regression.item();
        }
        const double n = double(train.size);
        // Cycle sums are reported per training batch of the configured size.
        const double per_batch = double(std::min(opt.batch_size, train.size)) / n;
        acc[0] /= n;
        acc[1] *= per_batch;
        acc[2] *= per_batch;
        acc[3] = acc[0] + lambda * (acc[1] + acc[2]);
        acc[4] /= n;
        acc[5] = acc[4] + lambda * acc[1];
        record(0, acc);
    }

    for (int epoch = 1; epoch <= opt.epochs && !diverged; ++epoch) {
        auto order = shuffle.permutation(train.size);
        std::vector<double> acc(6, 0.0);
        const auto batches = make_batches(order, opt.batch_size);
        for (auto rows : batches) {
            auto b = batch_tensors(rows);

            g.set_trainable(false);
            SurrogateLossTerms t;
            if (lambda > 0) {
                t = surrogate_loss(f, g, d, b.x, b.z, b.dz, lambda);
            } else {
                // Zero weight: the penalty is only logged, so keep it off the tape.
                t.regression = ops::mse(f.forward(b.x), b.z);
                NoGradGuard guard;
                t.penalty = cycle_penalty(f, g, d, b.x, b.z, b.dz);
                t.total = t.regression;
            }
            if (!std::isfinite(t.total.item())) {
                diverged = epoch;
                break;
            }
            t.total.backward();
            f_opt.step();
            g.set_trainable(true);

            f.set_trainable(false);
            auto it = inverse_loss(g, f, b.dz, b.z, b.x, lambda);
            if (!std::isfinite(it.total.item())) {
                diverged = epoch;
                f.set_trainable(true);
                break;
            }
            it.total.backward();
            g_opt.step();
            f.set_trainable(true);

            const double w = double(rows.size());
            acc[0] += w * t.regression.item();
            acc[1] += t.penalty.latent.item();
            acc[2] += t.penalty.input.item();
            acc[3] += w * t.total.item();
            acc[4] += w * it.regression.item();
            acc[5] += w * it.total.item();
        }
        if (diverged) break;
        const double n = double(train.size), nb = double(batches.size());
        record(epoch, {acc[0] / n, acc[1] / nb, acc[2] / nb, acc[3] / n, acc[4] / n, acc[5] / n});
        if (stopper.should_stop(epoch)) break;
    }

    return SurrogateResult{std::move(*best_f), std::move(*best_g), std::move(log), stopper.best_epoch(), diverged};
}

BaselineResult train_baseline(const Dataset& train, const Dataset& val, const ArchConfig& arch, double gamma_s,
                              const TrainOptions& opt) {
    if (!train.normalized || !val.normalized) throw Error("train-baseline: datasets must be normalized");
    Stopwatch clock;
    Rng init(derive_seed(opt.seed, 0));
    BaselineNet net(arch, init);
    Rng shuffle(derive_seed(opt.seed, 1));
    Adam adam(net.parameters(), opt.adam);
    TrainingLog log({"epoch", "image", "scalar", "total", "val_image", "val_scalar"});
    EarlyStopper stopper(opt.patience);
    std::optional<BaselineNet> best;

    auto evaluate = [&](const Dataset& ds) {
        NoGradGuard guard;
        double img = 0, sca = 0;
        for (std::size_t b = 0; b < ds.size; b += kEvalChunk) {
            auto batch = gather_range(ds, b, std::min(ds.size, b + kEvalChunk));
            auto y = net.forward(batch.x);
            img += ops::sse(y.images, batch.images).item();
            sca += ops::sse(y.scalars, batch.scalars).item();
        }
        return std::pair{img / double(ds.size * ds.shape.image_size()), sca / double(ds.size * ds.shape.n_sca)};
    };
    auto record = [&](int epoch, double img, double sca) {
        auto [vi, vs] = evaluate(val);
        log.add({double(epoch), img, sca, img + gamma_s * sca, vi, vs}, clock.seconds());
        if (stopper.update(vi + gamma_s * vs, epoch)) best = net;
    };
    {
        auto [ti, ts] = evaluate(train);
        record(0, ti, ts);
    }
    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        auto order = shuffle.permutation(train.size);
        double img = 0, sca = 0;
        for (auto rows : make_batches(order, opt.batch_size)) {
            auto batch = gather(train, rows);
            auto y = net.forward(batch.x);
            auto li = ops::mse(y.images, batch.images);
            auto ls = ops::mse(y.scalars, batch.scalars);
            auto loss = ops::add(li, ops::scale(ls, gamma_s));
            if (!std::isfinite(loss.item())) {
                throw DivergenceError("train-baseline: non-finite loss at epoch " + std::to_string(epoch), epoch);
            }
            loss.backward();
            adam.step();
            img += double(rows.size()) * li.item();
            sca += double(rows.size()) * ls.item();
        }
        record(epoch, img / double(train.size), sca / double(train.size));
        if (stopper.should_stop(epoch)) break;
    }
    return BaselineResult{std::move(*best), std::move(log), stopper.best_epoch()};
}

}  // namespace macc
