#include "macc/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <thread>

#include "macc/error.hpp"
#include "macc/lhs.hpp"

namespace macc {

namespace {

constexpr std::size_t kEvalChunk = 250;

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

void finish_csv(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; }

}  // namespace

Predictor surrogate_predictor(const ForwardNet& f, const Decoder& d) {
    return [&f, &d](const Tensor& x) { return predict_outputs(f, d, x); };
}

Predictor baseline_predictor(const BaselineNet& net) {
    return [&net](const Tensor& x) { return net.forward(x); };
}

PredictionTable predict_table(const Predictor& model, std::span<const double> x, std::size_t d_in,
                              const SimShape& shape) {
    NoGradGuard guard;
    PredictionTable out;
    const auto n = x.size() / d_in;
    out.images.reserve(n * shape.image_size());
    out.scalars.reserve(n * shape.n_sca);
    for (std::size_t b = 0; b < n; b += kEvalChunk) {
        const auto m = std::min(n, b + kEvalChunk) - b;
        Tensor xb({m, d_in}, std::vector<double>(x.begin() + b * d_in, x.begin() + (b + m) * d_in));
        auto y = model(xb);
        if (y.images.numel() != m * shape.image_size() || y.scalars.numel() != m * shape.n_sca) {
            throw ShapeError("predict: model output shapes " + shape_str(y.images.shape()) + " / " +
                             shape_str(y.scalars.shape()) + " do not match the dataset");
        }
        out.images.insert(out.images.end(), y.images.data().begin(), y.images.data().end());
        out.scalars.insert(out.scalars.end(), y.scalars.data().begin(), y.scalars.data().end());
    }
    return out;
}

std::vector<BandStat> mse_per_band(const Predictor& model, const Dataset& val) {
    if (val.size == 0) throw Error("mse_per_band: empty validation set");
    const auto& s = val.shape;
    auto pred = predict_table(model, val.x, s.d_in, s);
    const auto plane = s.height * s.width;
    std::vector<BandStat> out(s.n_band);
    std::vector<double> per_sample(val.size);
    for (std::size_t k = 0; k < s.n_band; ++k) {
        for (std::size_t i = 0; i < val.size; ++i) {
            const auto off = i * s.image_size() + k * plane;
            double acc = 0;
            for (std::size_t p = 0; p < plane; ++p) {
                const double e = pred.images[off + p] - val.images[off + p];
                acc += e * e;
            }
            per_sample[i] = acc / double(plane);
        }
        double mean = 0;
        for (double v : per_sample) mean += v;
        mean /= double(val.size);
        double var = 0;
        for (double v : per_sample) var += (v - mean) * (v - mean);
        out[k] = {mean, std::sqrt(var / double(val.size))};
    }
    return out;
}

double image_mse(const Predictor& model, const Dataset& val) {
    auto bands = mse_per_band(model, val);
    double acc = 0;
    for (auto& b : bands) acc += b.mean;
    return acc / double(bands.size());
}

std::optional<double> r2(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) {
        throw ShapeError("r2: " + std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) +
                         " targets");
    }
    if (truth.size() < 2) return std::nullopt;
    double mean = 0;
    for (double t : truth) mean += t;
    mean /= double(truth.size());
    double ss_tot = 0, ss_res = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    }
    if (ss_tot == 0) return std::nullopt;
    return 1.0 - ss_res / ss_tot;
}

std::optional<double> mean_r2_scalars(const Predictor& model, const Dataset& val) {
    const auto& s = val.shape;
    auto pred = predict_table(model, val.x, s.d_in, s);
    std::vector<double> p(val.size), t(val.size);
    double acc = 0;
    int count = 0;
    for (std::size_t j = 0; j < s.n_sca; ++j) {
        for (std::size_t i = 0; i < val.size; ++i) {
            p[i] = pred.scalars[i * s.n_sca + j];
            t[i] = val.scalars[i * s.n_sca + j];
        }
        if (auto v = r2(p, t)) {
            acc += *v;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return acc / count;
}

std::vector<ScanSet> make_scan_sets(const Dataset& val, std::size_t bases_per_dim, std::size_t steps,
                                    std::uint64_t seed) {
    if (val.size == 0) throw Error("scan sets: empty validation set");
    if (steps < 2) throw Error("scan sets: need at least 2 steps");
    const auto d = val.shape.d_in;
    std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -lo[0]);
    for (std::size_t i = 0; i < val.size; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], val.x[i * d + j]);
            hi[j] = std::max(hi[j], val.x[i * d + j]);
        }
    }
    Rng rng(seed);
    std::vector<ScanSet> out;
    for (std::size_t dim = 0; dim < d; ++dim) {
        auto design = lhs_sample(bases_per_dim, d, rng);
        for (std::size_t b = 0; b < bases_per_dim; ++b) {
            ScanSet s;
            s.dim = dim;
            s.steps = steps;
            s.x0.resize(d);
            for (std::size_t j = 0; j < d; ++j) s.x0[j] = lo[j] + (hi[j] - lo[j]) * design[b * d + j];
            s.points.resize(steps * d);
            for (std::size_t k = 0; k < steps; ++k) {
                std::copy(s.x0.begin(), s.x0.end(), s.points.begin() + k * d);
                s.points[k * d + dim] = double(k) / double(steps - 1);
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<InverseFn> inverse_functions(const std::vector<InverseNet>& nets) {
    std::vector<InverseFn> out;
    for (const auto& g : nets) out.emplace_back([&g](const Prediction& y) { return g.forward(y); });
    return out;
}

ConsistencyReport consistency_score(const Predictor& model, const std::vector<InverseFn>& ensemble,
                                    const std::vector<ScanSet>& scans) {
    if (ensemble.empty()) throw Error("consistency: empty inverse ensemble");
    if (scans.empty()) throw Error("consistency: no scan sets");
    const auto d = scans.front().x0.size();
    ConsistencyReport rep;
    rep.members = ensemble.size();
    rep.member_r2.assign(rep.members, 0.0);
    rep.member_r2_all_dims.assign(rep.members, 0.0);
    rep.member_param_r2.assign(rep.members, std::vector<double>(d, 0.0));
    std::vector<std::size_t> per_dim(d, 0);
    for (const auto& s : scans) ++per_dim[s.dim];

    NoGradGuard guard;
    for (const auto& s : scans) {
        Tensor x({s.steps, d}, s.points);
        auto y = model(x);
        std::vector<double> truth(s.steps), rec(s.steps);
        for (std::size_t k = 0; k < s.steps; ++k) truth[k] = s.points[k * d + s.dim];
        for (std::size_t m = 0; m < ensemble.size(); ++m) {
            auto xr = ensemble[m](y);
            auto xd = xr.data();
            for (std::size_t k = 0; k < s.steps; ++k) rec[k] = xd[k * d + s.dim];
            const double v = r2(rec, truth).value();
            rep.member_r2[m] += v / double(scans.size());
            rep.member_param_r2[m][s.dim] += v / double(per_dim[s.dim]);
            rep.member_r2_all_dims[m] += r2(xd, s.points).value_or(0.0) / double(scans.size());
        }
    }
    rep.flagged.resize(rep.members);
    for (std::size_t m = 0; m < rep.members; ++m) {
        for (std::size_t j = 0; j < d; ++j) rep.flagged[m].push_back(per_dim[j] && rep.member_param_r2[m][j] < kConsistencyFlag);
        rep.sum += rep.member_r2[m];
    }
    rep.mean = rep.sum / double(rep.members);
    return rep;
}

double mean_nearest_neighbor_distance(std::span<const double> x, std::size_t d_in) {
    const auto n = x.size() / d_in;
    if (n < 2) throw Error("nearest neighbour: need at least two points");
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            double dd = 0;
            for (std::size_t j = 0; j < d_in; ++j) {
                const double e = x[i * d_in + j] - x[k * d_in + j];
                dd += e * e;
            }
            best = std::min(best, dd);
        }
        acc += std::sqrt(best);
    }
    return acc / double(n);
}

PerturbationReport perturbation_test(const Predictor& model, const Dataset& val, const Dataset& reference,
                                     double sigma, std::uint64_t seed) {
    if (!(sigma >= 0)) throw ConfigError("perturbation: sigma must be >= 0");
    if (val.size == 0) throw Error("perturbation: empty validation set");
    const auto& s = val.shape;
    const auto d = s.d_in;
    Rng rng(seed);
    std::vector<double> xp(val.x.size());
    double shift = 0;
    for (std::size_t i = 0; i < val.size; ++i) {
        double dd = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double x = val.x[i * d + j];
            const double v = std::clamp(x + sigma * rng.uniform(-1.0, 1.0), 0.0, 1.0);
            xp[i * d + j] = v;
            dd += (v - x) * (v - x);
        }
        shift += std::sqrt(dd);
    }
    auto clean = predict_table(model, val.x, d, s);
    auto pert = predict_table(model, xp, d, s);
    const auto img = s.image_size();
    PerturbationReport rep;
    rep.sigma = sigma;
    for (std::size_t i = 0; i < val.size; ++i) {
        double c = 0, p = 0;
        for (std::size_t k = 0; k < img; ++k) {
            const double t = val.images[i * img + k];
            c += (clean.images[i * img + k] - t) * (clean.images[i * img + k] - t);
            p += (pert.images[i * img + k] - t) * (pert.images[i * img + k] - t);
        }
        rep.clean_mse += c / double(img);
        rep.perturbed_mse += p / double(img);
        rep.sensitivity += (p - c) / double(img);
    }
    const double n = double(val.size);
    rep.clean_mse /= n;
    rep.perturbed_mse /= n;
    rep.sensitivity /= n;
    rep.mean_shift = shift / n;
    rep.nn_distance = mean_nearest_neighbor_distance(reference.x, d);
    rep.guard_ok = rep.mean_shift < rep.nn_distance;
    return rep;
}

StageSeeds StageSeeds::from(std::uint64_t seed) {
    return {seed, seed + 1000, seed + 2000, seed + 3000, seed + 4000, seed + 5000, seed + 6000, seed + 7000};
}

std::vector<SweepRow> small_data_sweep(const Dataset& train, const Dataset& val, const WaeModel& wae,
                                       const SweepOptions& options) {
    for (double f : options.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep: fraction must lie in (0, 1], got " + std::to_string(f));
    }
    for (double l : options.lambdas) {
        if (!(l >= 0)) throw ConfigError("sweep: lambda must be >= 0");
    }
    struct Cell {
        double fraction;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (double f : options.fractions) {
        for (auto sd : options.seeds) cells.push_back({f, sd});
    }
    const auto n_lambda = options.lambdas.size();
    std::vector<SweepRow> rows(cells.size() * n_lambda);
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) {
            try {
                const auto seeds = StageSeeds::from(cells[c].seed);
                auto subset_rows = bootstrap_subset(train.size, cells[c].fraction, seeds.sweep);
                auto sub = train.subset(subset_rows);
                auto inv_opt = options.inverse;
                inv_opt.seed = seeds.inverse;
                auto g = pretrain_inverse(sub, val, wae.arch, inv_opt);
                for (std::size_t l = 0; l < n_lambda; ++l) {
                    SurrogateConfig sc{options.lambdas[l], options.surrogate};
                    sc.train.seed = seeds.surrogate;
                    auto r = train_surrogate(sub, val, wae, g.net, sc);
                    auto& row = rows[c * n_lambda + l];
                    row.fraction = cells[c].fraction;
                    row.lambda = options.lambdas[l];
                    row.seed = cells[c].seed;
                    row.subset_size = sub.size;
                    row.val_image_mse = image_mse(surrogate_predictor(r.forward, wae.decoder), val);
                    row.val_regression = r.log.value(static_cast<std::size_t>(r.best_epoch), "val_regression");
                    if (r.diverged_at) row.val_image_mse = std::numeric_limits<double>::quiet_NaN();
                }
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    const auto n_workers = std::clamp<std::size_t>(options.threads, 1, cells.size());
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
    return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
    auto out = open_csv(path);
    const auto n_band = reports.empty() ? 0 : reports.front().bands.size();
    out << "model,seed,config_hash";
    for (std::size_t k = 0; k < n_band; ++k) out << ",band" << k << "_mse_mean,band" << k << "_mse_std";
    out << ",mean_r2_scalars,consistency_sum,consistency_mean,consistency_members,perturbation_sensitivity\n";
    for (const auto& r : reports) {
        out << r.model << ',' << r.seed << ',' << r.config_hash;
        for (const auto& b : r.bands) out << ',' << format_double(b.mean) << ',' << format_double(b.std);
        out << ',' << opt_str(r.mean_r2_scalars);
        if (r.consistency) {
            out << ',' << format_double(r.consistency->sum) << ',' << format_double(r.consistency->mean) << ','
                << r.consistency->members;
        } else {
            out << ",,,";
        }
        out << ',' << opt_str(r.perturbation_sensitivity) << '\n';
    }
    finish_csv(out, path);
}

void write_consistency_csv(const std::filesystem::path& path, const ConsistencyReport& rep) {
    auto out = open_csv(path);
    out << "member,param,r2,flagged\n";
    for (std::size_t m = 0; m < rep.members; ++m) {
        for (std::size_t j = 0; j < rep.member_param_r2[m].size(); ++j) {
            out << m << ',' << j << ',' << format_double(rep.member_param_r2[m][j]) << ','
                << (rep.flagged[m][j] ? 1 : 0) << '\n';
        }
        out << m << ",scanned," << format_double(rep.member_r2[m]) << ",\n";
        out << m << ",all_dims," << format_double(rep.member_r2_all_dims[m]) << ",\n";
    }
    out << "sum,," << format_double(rep.sum) << ",\n";
    out << "mean,," << format_double(rep.mean) << ",\n";
    finish_csv(out, path);
}

void write_perturbation_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<std::string, PerturbationReport>>& rows) {
    auto out = open_csv(path);
    out << "model,sigma,sensitivity,clean_mse,perturbed_mse,mean_shift,nn_distance,guard_ok\n";
    for (const auto& [name, r] : rows) {
        out << name << ',' << format_double(r.sigma) << ',' << format_double(r.sensitivity) << ','
            << format_double(r.clean_mse) << ',' << format_double(r.perturbed_mse) << ','
            << format_double(r.mean_shift) << ',' << format_double(r.nn_distance) << ',' << (r.guard_ok ? 1 : 0)
            << '\n';
    }
    finish_csv(out, path);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    auto out = open_csv(path);
    out << "fraction,lambda_cyc,seed,subset_size,val_image_mse,val_regression\n";
    for (const auto& r : rows) {
        out << format_double(r.fraction) << ',' << format_double(r.lambda) << ',' << r.seed << ',' << r.subset_size
            << ',' << format_double(r.val_image_mse) << ',' << format_double(r.val_regression) << '\n';
    }
    finish_csv(out, path);
}

}  // namespace macc
