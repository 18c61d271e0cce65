// Command-line driver for the MaCC pipeline stages.

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include "macc/error.hpp"
#include "macc/pipeline.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "runs";
    unsigned threads = 1;
};

macc::pipeline::RunContext context(const Flags& f) {
    macc::pipeline::RunContext ctx;
    ctx.config = f.config.empty() ? macc::ExperimentConfig{} : macc::parse_config(f.config);
    ctx.seed = f.seed.value_or(ctx.config.dataset.seed);
    ctx.out = f.out;
    ctx.threads = f.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : f.threads;
    ctx.progress = &std::cerr;
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MaCC surrogate pipeline: data generation, training and evaluation"};
    app.require_subcommand(1);
    Flags flags;

    using Stage = std::function<void(const macc::pipeline::RunContext&)>;
    const std::vector<std::tuple<std::string, std::string, Stage>> stages{
        {"generate-data", "Simulate the LHS design and write train/val datasets", macc::pipeline::generate_data},
        {"train-ae", "Train the Wasserstein autoencoder", macc::pipeline::train_ae},
        {"train-inverse", "Pretrain the pseudo-inverse and the bootstrap ensemble", macc::pipeline::train_inverse},
        {"train-surrogate", "Train the forward surrogate with cycle regularization", macc::pipeline::train_surrogate},
        {"train-baseline", "Train the conventional x -> y baseline", macc::pipeline::train_baseline},
        {"evaluate", "Write the metrics report", [](const auto& c) { macc::pipeline::evaluate(c); }},
        {"scan-test", "Scan-based self-consistency test", [](const auto& c) { macc::pipeline::scan_test(c); }},
        {"perturb-test", "Input perturbation robustness test", [](const auto& c) { macc::pipeline::perturb_test(c); }},
        {"sweep", "Small-data and lambda sweep", [](const auto& c) { macc::pipeline::sweep(c); }},
    };

    std::map<CLI::App*, Stage> dispatch;
    for (const auto& [name, help, fn] : stages) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "Experiment config file (defaults apply when omitted)")
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "Global seed (defaults to dataset.seed)");
        sub->add_option("--out", flags.out, "Artifact directory")->capture_default_str();
        if (name == "sweep") {
            sub->add_option("--threads", flags.threads, "Worker threads for independent runs (0 = all cores)")
                ->capture_default_str();
        }
        dispatch[sub] = fn;
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto& [sub, fn] : dispatch) {
            if (sub->parsed()) fn(context(flags));
        }
    } catch (const macc::MissingArtifactError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const macc::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const macc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
