#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "macc/config.hpp"
#include "macc/dataset.hpp"
#include "macc/eval.hpp"
#include "macc/inverse.hpp"
#include "macc/wae.hpp"

namespace macc::pipeline {

/// Shared inputs of every stage. `seed` fans out through StageSeeds.
struct RunContext {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::filesystem::path out = "runs";
    unsigned threads = 1;
    /// Progress messages; null silences them.
    std::ostream* progress = nullptr;
};

inline constexpr const char* kTrainData = "dataset_train.bin";
inline constexpr const char* kValData = "dataset_val.bin";
inline constexpr const char* kWae = "wae.ckpt";
inline constexpr const char* kInverse = "inverse.ckpt";
inline constexpr const char* kManifest = "ensemble.manifest";
inline constexpr const char* kSurrogate = "surrogate.ckpt";
inline constexpr const char* kSurrogateLastGood = "surrogate.lastgood.ckpt";
inline constexpr const char* kCotrainedInverse = "inverse_cotrained.ckpt";
inline constexpr const char* kBaseline = "baseline.ckpt";

/// "<stem>_<config hash>_<seed>.csv".
std::string report_name(const RunContext& ctx, const std::string& stem);

void generate_data(const RunContext& ctx);
void train_ae(const RunContext& ctx);
void train_inverse(const RunContext& ctx);
void train_surrogate(const RunContext& ctx);
void train_baseline(const RunContext& ctx);
MetricsReport evaluate(const RunContext& ctx);
ConsistencyReport scan_test(const RunContext& ctx);
std::vector<PerturbationReport> perturb_test(const RunContext& ctx);
std::vector<SweepRow> sweep(const RunContext& ctx);

/// Normalized train/val splits from the output directory.
std::pair<Dataset, Dataset> load_datasets(const RunContext& ctx);
WaeModel load_wae(const RunContext& ctx);
InverseNet load_inverse(const RunContext& ctx, const std::filesystem::path& file, const char* producer);
ForwardNet load_forward(const RunContext& ctx);
BaselineNet load_baseline(const RunContext& ctx);
std::vector<InverseNet> load_ensemble(const RunContext& ctx);

/// FNV-1a 64 of a file's bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

/// Writes "<artifact>.prov" next to the artifact.
void write_provenance(const RunContext& ctx, const std::string& command, const std::filesystem::path& artifact,
                      std::uint64_t stage_seed, const std::vector<std::filesystem::path>& inputs, double seconds);

}  // namespace macc::pipeline
