#include "macc/pipeline.hpp"

#include <fstream>
#include <ostream>

#include "macc/checkpoint.hpp"
#include "macc/error.hpp"
#include "macc/surrogate.hpp"

namespace macc::pipeline {

namespace fs = std::filesystem;

namespace {

fs::path require(const RunContext& ctx, const char* file, const char* producer) {
    auto p = ctx.out / file;
    if (!fs::exists(p)) {
        throw MissingArtifactError("missing " + p.string() + "; run `macc " + producer + "` first");
    }
    return p;
}

void say(const RunContext& ctx, const std::string& msg) {
    if (ctx.progress) *ctx.progress << msg << std::endl;
}

StageSeeds seeds(const RunContext& ctx) { return StageSeeds::from(ctx.seed); }

TrainOptions with_seed(TrainOptions o, std::uint64_t seed) {
    o.seed = seed;
    return o;
}

std::string member_file(std::size_t i) { return "ensemble_member_" + std::to_string(i) + ".ckpt"; }

}  // namespace

std::string report_name(const RunContext& ctx, const std::string& stem) {
    return stem + "_" + ctx.config.hash() + "_" + std::to_string(ctx.seed) + ".csv";
}

std::uint64_t file_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for hashing: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes);
}

void write_provenance(const RunContext& ctx, const std::string& command, const fs::path& artifact,
                      std::uint64_t stage_seed, const std::vector<fs::path>& inputs, double seconds) {
    auto path = artifact;
    path += ".prov";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "artifact=" << artifact.filename().string() << '\n'
        << "command=" << command << '\n'
        << "config_hash=" << ctx.config.hash() << '\n'
        << "seed=" << ctx.seed << '\n'
        << "stage_seed=" << stage_seed << '\n'
        << "artifact_hash=" << hex64(file_hash(artifact)) << '\n';
    for (const auto& in : inputs) out << "input=" << in.filename().string() << ':' << hex64(file_hash(in)) << '\n';
    out << "wall_time_s=" << format_double(seconds) << '\n';
    out << "# config\n" << ctx.config.canonical();
    if (!out) throw IoError("write failed: " + path.string());
}

std::pair<Dataset, Dataset> load_datasets(const RunContext& ctx) {
    auto train = load_dataset(require(ctx, kTrainData, "generate-data"), Split::Train);
    auto val = load_dataset(require(ctx, kValData, "generate-data"), Split::Val);
    const auto want = ctx.config.sim_shape();
    if (train.shape.d_in != want.d_in || train.shape.n_band != want.n_band || train.shape.height != want.height ||
        train.shape.width != want.width || train.shape.n_sca != want.n_sca) {
        throw ConfigError("dataset in " + ctx.out.string() + " does not match the configured shapes; rerun generate-data");
    }
    return {normalized(train), normalized(val)};
}

WaeModel load_wae(const RunContext& ctx) {
    WaeModel m(ctx.config.arch(), 0);
    load_checkpoint(require(ctx, kWae, "train-ae"), m.networks());
    return m;
}

InverseNet load_inverse(const RunContext& ctx, const fs::path& file, const char* producer) {
    Rng rng(0);
    InverseNet g(ctx.config.arch(), rng);
    load_checkpoint(require(ctx, file.string().c_str(), producer), {&g});
    return g;
}

ForwardNet load_forward(const RunContext& ctx) {
    Rng rng(0);
    ForwardNet f(ctx.config.arch(), rng);
    load_checkpoint(require(ctx, kSurrogate, "train-surrogate"), {&f});
    return f;
}

BaselineNet load_baseline(const RunContext& ctx) {
    Rng rng(0);
    BaselineNet b(ctx.config.arch(), rng);
    load_checkpoint(require(ctx, kBaseline, "train-baseline"), {&b});
    return b;
}

std::vector<InverseNet> load_ensemble(const RunContext& ctx) {
    auto records = read_manifest(require(ctx, kManifest, "train-inverse"));
    if (records.empty()) throw IoError("empty ensemble manifest in " + ctx.out.string());
    std::vector<InverseNet> out;
    for (const auto& r : records) out.push_back(load_inverse(ctx, r.checkpoint, "train-inverse"));
    return out;
}

void generate_data(const RunContext& ctx) {
    Stopwatch clock;
    const auto& d = ctx.config.dataset;
    const auto s = seeds(ctx).data;
    say(ctx, "generating " + std::to_string(d.n_train) + " train / " + std::to_string(d.n_val) + " val samples");
    auto pair = generate_dataset(d.n_train, d.n_val, s, ctx.config.sim_shape());
    fs::create_directories(ctx.out);
    save_dataset(ctx.out / kTrainData, pair.train);
    save_dataset(ctx.out / kValData, pair.val);
    write_provenance(ctx, "generate-data", ctx.out / kTrainData, s, {}, clock.seconds());
    write_provenance(ctx, "generate-data", ctx.out / kValData, s, {}, clock.seconds());
}

void train_ae(const RunContext& ctx) {
    Stopwatch clock;
    auto [train, val] = load_datasets(ctx);
    auto wc = ctx.config.wae_config();
    wc.train.seed = seeds(ctx).wae;
    say(ctx, "training autoencoder for up to " + std::to_string(wc.train.epochs) + " epochs");
    auto r = train_autoencoder(train, val, ctx.config.arch(), wc);
    save_checkpoint(ctx.out / kWae, r.model.networks());
    r.log.write_csv(ctx.out / "wae_log.csv");
    say(ctx, "best epoch " + std::to_string(r.best_epoch) + ", val image mse " +
                 format_double(r.log.value(std::size_t(r.best_epoch), "val_image")));
    write_provenance(ctx, "train-ae", ctx.out / kWae, wc.train.seed, {ctx.out / kTrainData, ctx.out / kValData},
                     clock.seconds());
}

void train_inverse(const RunContext& ctx) {
    Stopwatch clock;
    require(ctx, kWae, "train-ae");
    auto [train, val] = load_datasets(ctx);
    const auto arch = ctx.config.arch();
    const auto st = seeds(ctx);
    const std::vector<fs::path> inputs{ctx.out / kTrainData, ctx.out / kValData, ctx.out / kWae};

    say(ctx, "pretraining inverse");
    auto r = pretrain_inverse(train, val, arch, with_seed(ctx.config.inverse_options(), st.inverse));
    save_checkpoint(ctx.out / kInverse, {&r.net});
    r.log.write_csv(ctx.out / "inverse_log.csv");
    write_provenance(ctx, "train-inverse", ctx.out / kInverse, st.inverse, inputs, clock.seconds());

    std::vector<std::uint64_t> member_seeds;
    for (std::uint64_t i = 0; i < ctx.config.inverse.members; ++i) member_seeds.push_back(st.ensemble + i);
    say(ctx, "training " + std::to_string(member_seeds.size()) + " bootstrap inverses");
    auto ens = bootstrap_inverses(train, val, arch, ctx.config.inverse_options(), ctx.config.inverse.fraction,
                                  member_seeds, ctx.threads);
    std::vector<ManifestRecord> records;
    for (std::size_t i = 0; i < ens.members.size(); ++i) {
        const auto& m = ens.members[i];
        const auto file = member_file(i);
        save_checkpoint(ctx.out / file, {&m.net});
        m.log.write_csv(ctx.out / ("ensemble_member_" + std::to_string(i) + "_log.csv"));
        write_provenance(ctx, "train-inverse", ctx.out / file, m.seed, inputs, clock.seconds());
        records.push_back({i, file, m.seed, m.fraction, m.subset_size});
    }
    write_manifest(ctx.out / kManifest, records);
    write_provenance(ctx, "train-inverse", ctx.out / kManifest, st.ensemble, inputs, clock.seconds());
}

void train_surrogate(const RunContext& ctx) {
    Stopwatch clock;
    auto wae = load_wae(ctx);
    auto g0 = load_inverse(ctx, kInverse, "train-inverse");
    auto [train, val] = load_datasets(ctx);
    SurrogateConfig sc{ctx.config.surrogate.lambda_cyc, with_seed(ctx.config.surrogate_options(), seeds(ctx).surrogate)};
    say(ctx, "training surrogate with lambda_cyc = " + format_double(sc.lambda_cyc));
    auto r = macc::train_surrogate(train, val, wae, g0, sc);
    const std::vector<fs::path> inputs{ctx.out / kTrainData, ctx.out / kValData, ctx.out / kWae, ctx.out / kInverse};
    r.log.write_csv(ctx.out / "surrogate_log.csv");
    if (r.diverged_at) {
        save_checkpoint(ctx.out / kSurrogateLastGood, {&r.forward, &r.inverse});
        write_provenance(ctx, "train-surrogate", ctx.out / kSurrogateLastGood, sc.train.seed, inputs, clock.seconds());
        throw DivergenceError("train-surrogate: non-finite loss at epoch " + std::to_string(*r.diverged_at) +
                                  "; last good state saved to " + (ctx.out / kSurrogateLastGood).string(),
                              *r.diverged_at);
    }
    save_checkpoint(ctx.out / kSurrogate, {&r.forward});
    save_checkpoint(ctx.out / kCotrainedInverse, {&r.inverse});
    write_provenance(ctx, "train-surrogate", ctx.out / kSurrogate, sc.train.seed, inputs, clock.seconds());
    write_provenance(ctx, "train-surrogate", ctx.out / kCotrainedInverse, sc.train.seed, inputs, clock.seconds());
}

void train_baseline(const RunContext& ctx) {
    Stopwatch clock;
    auto [train, val] = load_datasets(ctx);
    const auto s = seeds(ctx).baseline;
    say(ctx, "training baseline");
    auto r = macc::train_baseline(train, val, ctx.config.arch(), ctx.config.wae.gamma_s,
                                  with_seed(ctx.config.surrogate_options(), s));
    save_checkpoint(ctx.out / kBaseline, {&r.net});
    r.log.write_csv(ctx.out / "baseline_log.csv");
    write_provenance(ctx, "train-baseline", ctx.out / kBaseline, s, {ctx.out / kTrainData, ctx.out / kValData},
                     clock.seconds());
}

namespace {

std::vector<ScanSet> scans_for(const RunContext& ctx, const Dataset& val) {
    return make_scan_sets(val, ctx.config.eval.scan_bases, ctx.config.eval.scan_steps, derive_seed(seeds(ctx).eval, 0));
}

}  // namespace

MetricsReport evaluate(const RunContext& ctx) {
    Stopwatch clock;
    auto f = load_forward(ctx);
    auto wae = load_wae(ctx);
    auto ensemble = load_ensemble(ctx);
    auto [train, val] = load_datasets(ctx);
    std::vector<fs::path> inputs{ctx.out / kValData, ctx.out / kWae, ctx.out / kSurrogate, ctx.out / kManifest};

    auto score = [&](const std::string& name, const Predictor& model) {
        MetricsReport r;
        r.model = name;
        r.seed = ctx.seed;
        r.config_hash = ctx.config.hash();
        r.bands = mse_per_band(model, val);
        r.mean_r2_scalars = macc::mean_r2_scalars(model, val);
        r.consistency = consistency_score(model, inverse_functions(ensemble), scans_for(ctx, val));
        r.perturbation_sensitivity =
            perturbation_test(model, val, train, ctx.config.eval.sigma, derive_seed(seeds(ctx).eval, 1)).sensitivity;
        return r;
    };
    std::vector<MetricsReport> reports{score("macc", surrogate_predictor(f, wae.decoder))};
    if (ctx.config.surrogate.baseline && fs::exists(ctx.out / kBaseline)) {
        auto b = load_baseline(ctx);
        inputs.push_back(ctx.out / kBaseline);
        reports.push_back(score("baseline", baseline_predictor(b)));
    } else if (ctx.config.surrogate.baseline) {
        say(ctx, "no " + std::string(kBaseline) + "; run `macc train-baseline` to include the baseline");
    }
    const auto path = ctx.out / report_name(ctx, "metrics");
    write_metrics_csv(path, reports);
    write_provenance(ctx, "evaluate", path, seeds(ctx).eval, inputs, clock.seconds());
    for (const auto& r : reports) {
        say(ctx, r.model + ": band0 mse " + format_double(r.bands[0].mean) + ", consistency mean " +
                     format_double(r.consistency->mean) + ", sensitivity " + format_double(*r.perturbation_sensitivity));
    }
    return reports.front();
}

ConsistencyReport scan_test(const RunContext& ctx) {
    Stopwatch clock;
    auto f = load_forward(ctx);
    auto wae = load_wae(ctx);
    auto ensemble = load_ensemble(ctx);
    auto [train, val] = load_datasets(ctx);
    auto rep = consistency_score(surrogate_predictor(f, wae.decoder), inverse_functions(ensemble), scans_for(ctx, val));
    const auto path = ctx.out / report_name(ctx, "consistency");
    write_consistency_csv(path, rep);
    write_provenance(ctx, "scan-test", path, seeds(ctx).eval,
                     {ctx.out / kValData, ctx.out / kWae, ctx.out / kSurrogate, ctx.out / kManifest}, clock.seconds());
    std::size_t flagged = 0;
    for (const auto& m : rep.flagged) flagged += static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
    say(ctx, "consistency sum " + format_double(rep.sum) + " mean " + format_double(rep.mean) + " over " +
                 std::to_string(rep.members) + " members; " + std::to_string(flagged) + " member/parameter pairs below " +
                 format_double(kConsistencyFlag));
    return rep;
}

std::vector<PerturbationReport> perturb_test(const RunContext& ctx) {
    Stopwatch clock;
    auto f = load_forward(ctx);
    auto wae = load_wae(ctx);
    auto [train, val] = load_datasets(ctx);
    std::vector<fs::path> inputs{ctx.out / kTrainData, ctx.out / kValData, ctx.out / kWae, ctx.out / kSurrogate};
    std::vector<std::pair<std::string, PerturbationReport>> rows;
    const auto s = derive_seed(seeds(ctx).eval, 1);
    auto run = [&](const std::string& name, const Predictor& model) {
        for (double sigma : {0.0, ctx.config.eval.sigma}) rows.emplace_back(name, perturbation_test(model, val, train, sigma, s));
    };
    run("macc", surrogate_predictor(f, wae.decoder));
    if (ctx.config.surrogate.baseline && fs::exists(ctx.out / kBaseline)) {
        auto b = load_baseline(ctx);
        inputs.push_back(ctx.out / kBaseline);
        run("baseline", baseline_predictor(b));
    }
    const auto path = ctx.out / report_name(ctx, "perturbation");
    write_perturbation_csv(path, rows);
    write_provenance(ctx, "perturb-test", path, s, inputs, clock.seconds());
    std::vector<PerturbationReport> out;
    for (auto& [name, r] : rows) {
        if (!r.guard_ok) {
            say(ctx, "warning: " + name + " mean perturbation distance " + format_double(r.mean_shift) +
                         " is not below the train nearest-neighbour distance " + format_double(r.nn_distance));
        }
        say(ctx, name + " sigma " + format_double(r.sigma) + ": sensitivity " + format_double(r.sensitivity));
        out.push_back(r);
    }
    return out;
}

std::vector<SweepRow> sweep(const RunContext& ctx) {
    Stopwatch clock;
    auto wae = load_wae(ctx);
    auto [train, val] = load_datasets(ctx);
    SweepOptions opt;
    opt.fractions = ctx.config.eval.fractions;
    opt.lambdas = ctx.config.eval.sweep_lambdas;
    opt.seeds.clear();
    for (auto s : ctx.config.eval.sweep_seeds) opt.seeds.push_back(ctx.seed + s);
    opt.inverse = ctx.config.inverse_options();
    opt.surrogate = ctx.config.surrogate_options();
    opt.threads = ctx.threads;
    say(ctx, "sweeping " + std::to_string(opt.fractions.size() * opt.lambdas.size() * opt.seeds.size()) + " arms on " +
                 std::to_string(opt.threads) + " thread(s)");
    auto rows = small_data_sweep(train, val, wae, opt);
    const auto path = ctx.out / report_name(ctx, "sweep");
    write_sweep_csv(path, rows);
    write_provenance(ctx, "sweep", path, seeds(ctx).sweep, {ctx.out / kTrainData, ctx.out / kValData, ctx.out / kWae},
                     clock.seconds());
    return rows;
}

}  // namespace macc::pipeline
