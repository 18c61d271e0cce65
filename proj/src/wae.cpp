#include "macc/wae.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "macc/error.hpp"

namespace macc {

namespace {

constexpr std::size_t kEvalChunk = 250;

WaeModel build(const ArchConfig& arch, Rng rng) {
    // Construction order fixes the initialization stream.
    Encoder e(arch, rng);
    Decoder d(arch, rng);
    Discriminator q(arch, rng);
    return WaeModel{arch, std::move(e), std::move(d), std::move(q)};
}

std::vector<Tensor> joined(const Network& a, const Network& b) {
    auto p = a.parameters();
    auto q = b.parameters();
    p.insert(p.end(), q.begin(), q.end());
    return p;
}

}  // namespace

WaeModel::WaeModel(const ArchConfig& a, std::uint64_t seed) : WaeModel(build(a, Rng(seed))) {}

WaeModel::WaeModel(const ArchConfig& a, Encoder e, Decoder d, Discriminator q)
    : arch(a), encoder(std::move(e)), decoder(std::move(d)), discriminator(std::move(q)) {}

WaeLossTerms wae_loss(const WaeModel& model, const Batch& batch, double gamma_s, double gamma_a) {
    if (batch.size() == 0) throw Error("wae_loss: empty batch");
    auto z = model.encode(batch.images, batch.scalars);
    auto y = model.decode(z);
    WaeLossTerms t;
    t.image = ops::mse(y.images, batch.images);
    t.scalar = ops::mse(y.scalars, batch.scalars);
    t.adversarial = ops::bce(model.discriminator.forward(z), 1.0);
    t.total = ops::add(ops::add(t.image, ops::scale(t.scalar, gamma_s)), ops::scale(t.adversarial, gamma_a));
    return t;
}

Tensor sample_prior(std::size_t batch, std::size_t latent_dim, Rng& rng) {
    std::vector<double> v(batch * latent_dim);
    for (auto& e : v) e = rng.uniform(-1.0, 1.0);
    return Tensor({batch, latent_dim}, std::move(v));
}

Tensor discriminator_loss(const WaeModel& model, const Tensor& prior, const Tensor& encoded) {
    const auto n_real = prior.dim(0), n_fake = encoded.dim(0);
    std::vector<double> labels(n_real + n_fake, 0.0);
    std::fill_n(labels.begin(), n_real, 1.0);
    auto p = model.discriminator.forward(ops::concat({prior, encoded}, 0));
    return ops::bce(p, Tensor({n_real + n_fake, 1}, std::move(labels)));
}

double discriminator_step(WaeModel& model, Adam& optimizer, const Batch& batch, Rng& rng) {
    Tensor fake;
    {
        NoGradGuard guard;
        fake = model.encode(batch.images, batch.scalars);
    }
    auto prior = sample_prior(batch.size(), model.arch.latent_dim, rng);
    auto loss = discriminator_loss(model, prior, fake);
    const double value = loss.item();
    if (!std::isfinite(value)) return value;
    loss.backward();
    optimizer.step();
    return value;
}

WaeEvaluation evaluate_wae(const WaeModel& model, const Dataset& ds, double gamma_s, double gamma_a) {
    if (ds.size == 0) throw Error("evaluate_wae: empty dataset");
    NoGradGuard guard;
    double img = 0, sca = 0, adv = 0;
    for (std::size_t b = 0; b < ds.size; b += kEvalChunk) {
        auto batch = gather_range(ds, b, std::min(ds.size, b + kEvalChunk));
        auto z = model.encode(batch.images, batch.scalars);
        auto y = model.decode(z);
        img += ops::sse(y.images, batch.images).item();
        sca += ops::sse(y.scalars, batch.scalars).item();
        adv += ops::bce(model.discriminator.forward(z), 1.0).item() * static_cast<double>(batch.size());
    }
    WaeEvaluation e;
    e.image_mse = img / static_cast<double>(ds.size * ds.shape.image_size());
    e.scalar_mse = sca / static_cast<double>(ds.size * ds.shape.n_sca);
    e.adversarial = adv / static_cast<double>(ds.size);
    e.total = e.image_mse + gamma_s * e.scalar_mse + gamma_a * e.adversarial;
    return e;
}

std::vector<double> encode_dataset(const WaeModel& model, const Dataset& ds) {
    NoGradGuard guard;
    std::vector<double> out;
    out.reserve(ds.size * model.arch.latent_dim);
    for (std::size_t b = 0; b < ds.size; b += kEvalChunk) {
        auto batch = gather_range(ds, b, std::min(ds.size, b + kEvalChunk));
        auto z = model.encode(batch.images, batch.scalars);
        out.insert(out.end(), z.data().begin(), z.data().end());
    }
    return out;
}

double latent_ks_median(const std::vector<double>& latents, std::size_t latent_dim) {
    const auto n = latents.size() / latent_dim;
    if (n == 0) throw Error("latent_ks_median: no latents");
    std::vector<double> stats;
    std::vector<double> col(n);
    for (std::size_t j = 0; j < latent_dim; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = latents[i * latent_dim + j];
        std::sort(col.begin(), col.end());
        double d = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double cdf = std::clamp((col[i] + 1.0) / 2.0, 0.0, 1.0);
            d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
        }
        stats.push_back(d);
    }
    std::sort(stats.begin(), stats.end());
    const auto m = stats.size();
    return m % 2 ? stats[m / 2] : 0.5 * (stats[m / 2 - 1] + stats[m / 2]);
}

namespace {

double discriminator_eval(const WaeModel& model, const Dataset& ds, Rng& rng) {
    NoGradGuard guard;
    double acc = 0;
    for (std::size_t b = 0; b < ds.size; b += kEvalChunk) {
        auto batch = gather_range(ds, b, std::min(ds.size, b + kEvalChunk));
        auto fake = model.encode(batch.images, batch.scalars);
        auto prior = sample_prior(batch.size(), model.arch.latent_dim, rng);
        acc += discriminator_loss(model, prior, fake).item() * static_cast<double>(batch.size());
    }
    return acc / static_cast<double>(ds.size);
}

}  // namespace

WaeResult train_autoencoder(const Dataset& train, const Dataset& val, const ArchConfig& arch,
                            const WaeConfig& config) {
    if (config.gamma_s <= 0 || config.gamma_a <= 0) throw ConfigError("train-ae: gamma_s and gamma_a must be positive");
    if (!train.normalized || !val.normalized) throw Error("train-ae: datasets must be normalized");
    const auto& opt = config.train;
    Stopwatch clock;
    WaeModel model(arch, derive_seed(opt.seed, 0));
    Rng shuffle(derive_seed(opt.seed, 1));
    Rng prior_rng(derive_seed(opt.seed, 2));
    Rng eval_rng(derive_seed(opt.seed, 3));
    Adam ae_opt(joined(model.encoder, model.decoder), opt.adam);
    Adam disc_opt(model.discriminator.parameters(), opt.adam);

    TrainingLog log({"epoch", "image", "scalar", "adversarial", "total", "discriminator", "val_image", "val_scalar",
                     "val_total"});
    EarlyStopper stopper(opt.patience);
    std::optional<WaeModel> best;

    auto record = [&](int epoch, double img, double sca, double adv, double tot, double disc) {
        auto v = evaluate_wae(model, val, config.gamma_s, config.gamma_a);
        log.add({double(epoch), img, sca, adv, tot, disc, v.image_mse, v.scalar_mse, v.total}, clock.seconds());
        if (stopper.update(v.image_mse + config.gamma_s * v.scalar_mse, epoch)) best = model;
    };

    {
        auto t = evaluate_wae(model, train, config.gamma_s, config.gamma_a);
        record(0, t.image_mse, t.scalar_mse, t.adversarial, t.total, discriminator_eval(model, train, eval_rng));
    }

    int epoch = 1;
    for (; epoch <= opt.epochs; ++epoch) {
        auto order = shuffle.permutation(train.size);
        double img = 0, sca = 0, adv = 0, tot = 0, disc = 0;
        for (auto rows : make_batches(order, opt.batch_size)) {
            auto batch = gather(train, rows);
            const double d = discriminator_step(model, disc_opt, batch, prior_rng);

            model.discriminator.set_trainable(false);
            auto terms = wae_loss(model, batch, config.gamma_s, config.gamma_a);
            const double total = terms.total.item();
            if (!std::isfinite(total) || !std::isfinite(d)) {
                throw DivergenceError("train-ae: non-finite loss at epoch " + std::to_string(epoch), epoch);
            }
            terms.total.backward();
            ae_opt.step();
            model.discriminator.set_trainable(true);

            const double w = static_cast<double>(rows.size());
            img += w * terms.image.item();
            sca += w * terms.scalar.item();
            adv += w * terms.adversarial.item();
            tot += w * total;
            disc += w * d;
        }
        const double n = static_cast<double>(train.size);
        record(epoch, img / n, sca / n, adv / n, tot / n, disc / n);
        if (stopper.should_stop(epoch)) break;
    }

    return WaeResult{std::move(*best), std::move(log), stopper.best_epoch(), std::min(epoch, opt.epochs)};
}

}  // namespace macc
