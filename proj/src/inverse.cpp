#include "macc/inverse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "macc/adam.hpp"
#include "macc/error.hpp"

namespace macc {

namespace {
constexpr std::size_t kEvalChunk = 250;
}

double inverse_mse(const InverseNet& g, const Dataset& ds) {
    if (ds.size == 0) throw Error("inverse_mse: empty dataset");
    NoGradGuard guard;
    double acc = 0;
    for (std::size_t b = 0; b < ds.size; b += kEvalChunk) {
        auto batch = gather_range(ds, b, std::min(ds.size, b + kEvalChunk));
        acc += ops::sse(g.forward(batch.images, batch.scalars), batch.x).item();
    }
    return acc / static_cast<double>(ds.size * ds.shape.d_in);
}

std::vector<double> inverse_predict_dataset(const InverseNet& g, const Dataset& ds) {
    NoGradGuard guard;
    std::vector<double> out;
    out.reserve(ds.size * ds.shape.d_in);
    for (std::size_t b = 0; b < ds.size; b += kEvalChunk) {
        auto batch = gather_range(ds, b, std::min(ds.size, b + kEvalChunk));
        auto xh = g.forward(batch.images, batch.scalars);
        out.insert(out.end(), xh.data().begin(), xh.data().end());
    }
    return out;
}

InverseResult pretrain_inverse(const Dataset& train, const Dataset& val, const ArchConfig& arch,
                               const TrainOptions& opt) {
    if (!train.normalized || !val.normalized) throw Error("train-inverse: datasets must be normalized");
    Stopwatch clock;
    Rng init(derive_seed(opt.seed, 0));
    InverseNet g(arch, init);
    Rng shuffle(derive_seed(opt.seed, 1));
    Adam adam(g.parameters(), opt.adam);
    TrainingLog log({"epoch", "mse", "val_mse"});
    EarlyStopper stopper(opt.patience);
    std::optional<InverseNet> best;

    auto record = [&](int epoch, double mse) {
        const double v = inverse_mse(g, val);
        log.add({double(epoch), mse, v}, clock.seconds());
        if (stopper.update(v, epoch)) best = g;
    };
    record(0, inverse_mse(g, train));

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        auto order = shuffle.permutation(train.size);
        double acc = 0;
        for (auto rows : make_batches(order, opt.batch_size)) {
            auto batch = gather(train, rows);
            auto loss = ops::mse(g.forward(batch.images, batch.scalars), batch.x);
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw DivergenceError("train-inverse: non-finite loss at epoch " + std::to_string(epoch), epoch);
            }
            loss.backward();
            adam.step();
            acc += value * static_cast<double>(rows.size());
        }
        record(epoch, acc / static_cast<double>(train.size));
        if (stopper.should_stop(epoch)) break;
    }
    return InverseResult{std::move(*best), std::move(log), stopper.best_epoch()};
}

InverseLossTerms inverse_loss(const InverseNet& g, const ForwardNet& f, const Prediction& decoded, const Tensor& z,
                              const Tensor& x, double lambda_cyc) {
    if (x.dim(0) == 0) throw Error("inverse_loss: empty batch");
    auto xh = g.forward(decoded);
    InverseLossTerms t;
    t.regression = ops::mse(xh, x);
    t.cycle = ops::sse(f.forward(xh), z);
    t.total = ops::add(t.regression, ops::scale(t.cycle, lambda_cyc));
    return t;
}

InverseLossTerms inverse_loss(const InverseNet& g, const ForwardNet& f, const Decoder& d, const Tensor& z,
                              const Tensor& x, double lambda_cyc) {
    return inverse_loss(g, f, d.forward(z), z, x, lambda_cyc);
}

std::vector<std::size_t> bootstrap_subset(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("bootstrap: fraction must lie in (0, 1], got " + std::to_string(fraction));
    }
    auto perm = Rng(seed).permutation(n);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * double(n))), 1, n);
    perm.resize(k);
    std::sort(perm.begin(), perm.end());
    return perm;
}

InverseEnsemble bootstrap_inverses(const Dataset& train, const Dataset& val, const ArchConfig& arch,
                                   const TrainOptions& options, double fraction,
                                   const std::vector<std::uint64_t>& seeds, unsigned threads) {
    if (seeds.empty()) throw ConfigError("bootstrap: ensemble needs at least one member");
    // Validate before spawning any work.
    bootstrap_subset(train.size, fraction, seeds.front());

    std::vector<std::optional<EnsembleMember>> slots(seeds.size());
    std::vector<std::exception_ptr> errors(seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
            try {
                auto rows = bootstrap_subset(train.size, fraction, seeds[i]);
                auto opt = options;
                opt.seed = seeds[i];
                auto r = pretrain_inverse(train.subset(rows), val, arch, opt);
                slots[i].emplace(EnsembleMember{std::move(r.net), seeds[i], fraction, rows.size(), std::move(r.log)});
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto n_workers = std::clamp<std::size_t>(threads, 1, seeds.size());
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    InverseEnsemble out;
    for (auto& s : slots) out.members.push_back(std::move(*s));
    return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& r : records) {
        out << "member=" << r.member << " checkpoint=" << r.checkpoint << " seed=" << r.seed
            << " fraction=" << format_double(r.fraction) << " subset_size=" << r.subset_size << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    std::vector<ManifestRecord> out;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        ManifestRecord r;
        int seen = 0;
        for (std::string tok; fields >> tok;) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad field");
            auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
            try {
                if (key == "member") r.member = std::stoull(value), seen |= 1;
                else if (key == "checkpoint") r.checkpoint = value, seen |= 2;
                else if (key == "seed") r.seed = std::stoull(value), seen |= 4;
                else if (key == "fraction") r.fraction = std::stod(value), seen |= 8;
                else if (key == "subset_size") r.subset_size = std::stoull(value), seen |= 16;
                else throw IoError(path.string() + ":" + std::to_string(lineno) + ": unknown field " + key);
            } catch (const std::logic_error&) {
                throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad value for " + key);
            }
        }
        if (seen != 31) throw IoError(path.string() + ":" + std::to_string(lineno) + ": incomplete record");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace macc
