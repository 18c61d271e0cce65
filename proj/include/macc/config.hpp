#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "macc/networks.hpp"
#include "macc/surrogate.hpp"
#include "macc/training.hpp"
#include "macc/wae.hpp"

namespace macc {

struct ExperimentConfig {
    struct {
        std::uint64_t n_train = 2000;
        std::uint64_t n_val = 500;
        std::uint64_t image_size = 32;
        std::uint64_t n_band = 4;
        std::uint64_t n_sca = 8;
        std::uint64_t d_in = 5;
        std::uint64_t seed = 0;
    } dataset;
    struct {
        std::uint64_t latent_dim = 32;
        double gamma_s = 1e2;
        double gamma_a = 1e-3;
        std::uint64_t epochs = 200;
        std::uint64_t patience = 30;
    } wae;
    struct {
        std::uint64_t epochs = 100;
        std::uint64_t patience = 30;
        std::uint64_t members = 5;
        double fraction = 0.5;
    } inverse;
    struct {
        double lambda_cyc = 0.05;
        std::uint64_t epochs = 100;
        std::uint64_t patience = 30;
        bool baseline = true;
    } surrogate;
    struct {
        double sigma = 0.1;
        std::uint64_t scan_bases = 20;
        std::uint64_t scan_steps = 100;
        std::vector<double> fractions{0.1, 0.25, 0.5, 1.0};
        std::vector<double> sweep_lambdas{0.0, 0.01, 0.05, 0.10, 0.5, 1.0};
        std::vector<std::uint64_t> sweep_seeds{0, 1, 2};
    } eval;
    struct {
        double learning_rate = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        std::uint64_t batch_size = 128;
    } optimizer;

    /// "key = value" lines for every field, sorted by key.
    std::string canonical() const;
    /// 64-bit FNV-1a of canonical(), as 16 lowercase hex digits.
    std::string hash() const;

    SimShape sim_shape() const;
    ArchConfig arch() const;
    AdamConfig adam() const;
    TrainOptions wae_options() const;
    TrainOptions inverse_options() const;
    TrainOptions surrogate_options() const;
    WaeConfig wae_config() const;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Parses "section.key = value" lines; '#' starts a comment. Missing keys
/// keep their defaults. Errors carry "path:line:" anchors.
ExperimentConfig parse_config(const std::filesystem::path& path);
ExperimentConfig parse_config_text(std::string_view text, const std::string& origin = "<config>");

/// Range checks across the resolved config.
void validate(const ExperimentConfig& c, const std::string& origin = "<config>");

}  // namespace macc
