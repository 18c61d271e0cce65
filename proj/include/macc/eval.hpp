#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "macc/dataset.hpp"
#include "macc/inverse.hpp"
#include "macc/networks.hpp"
#include "macc/surrogate.hpp"

namespace macc {

/// Any x -> y model (MaCC surrogate path, baseline, or a test oracle).
using Predictor = std::function<Prediction(const Tensor& x)>;

Predictor surrogate_predictor(const ForwardNet& f, const Decoder& d);
Predictor baseline_predictor(const BaselineNet& net);

/// Predictions for every row of a dataset, evaluated in fixed-size chunks.
struct PredictionTable {
    std::vector<double> images;
    std::vector<double> scalars;
};
PredictionTable predict_table(const Predictor& model, std::span<const double> x, std::size_t d_in, const SimShape& shape);

struct BandStat {
    double mean = 0;
    double std = 0;
};

/// Per band: mean and population std over samples of the per-sample image MSE.
std::vector<BandStat> mse_per_band(const Predictor& model, const Dataset& val);

/// Mean image MSE over all bands, pixels and samples.
double image_mse(const Predictor& model, const Dataset& val);

/// Coefficient of determination; empty when there are fewer than two points
/// or the truth has zero variance.
std::optional<double> r2(std::span<const double> pred, std::span<const double> truth);

/// Mean R2 over scalar outputs whose R2 is defined.
std::optional<double> mean_r2_scalars(const Predictor& model, const Dataset& val);

/// Base point x0 with dimension `dim` swept linearly over [0, 1].
struct ScanSet {
    std::vector<double> x0;
    std::size_t dim = 0;
    std::size_t steps = 0;
    /// steps x d_in points, row-major.
    std::vector<double> points;
};

/// `bases_per_dim` LHS base points per dimension inside the val bounding box,
/// each scanned in `steps` steps.
std::vector<ScanSet> make_scan_sets(const Dataset& val, std::size_t bases_per_dim, std::size_t steps,
                                    std::uint64_t seed);

inline constexpr double kConsistencyFlag = 0.25;

struct ConsistencyReport {
    /// Mean over scan sets of the scanned-dimension R2, one per member.
    std::vector<double> member_r2;
    /// member x d_in: mean R2 over the scan sets of each dimension.
    std::vector<std::vector<double>> member_param_r2;
    /// member x d_in: member_param_r2 < kConsistencyFlag.
    std::vector<std::vector<bool>> flagged;
    /// Diagnostic: R2 over all coordinates of each scan, averaged per member.
    std::vector<double> member_r2_all_dims;
    double sum = 0;
    double mean = 0;
    std::size_t members = 0;
};

/// Any y -> x model.
using InverseFn = std::function<Tensor(const Prediction& y)>;
std::vector<InverseFn> inverse_functions(const std::vector<InverseNet>& nets);

/// Recovers scanned inputs through each held-out inverse: G_i(D(F(x_scan))).
ConsistencyReport consistency_score(const Predictor& model, const std::vector<InverseFn>& ensemble,
                                    const std::vector<ScanSet>& scans);

struct PerturbationReport {
    double sigma = 0;
    /// Mean over samples of mse(pred(x_hat), y(x)) - mse(pred(x), y(x)).
    double sensitivity = 0;
    double clean_mse = 0;
    double perturbed_mse = 0;
    /// Mean Euclidean distance between x and its clipped perturbation.
    double mean_shift = 0;
    /// Mean nearest-neighbour distance inside the reference (train) inputs.
    double nn_distance = 0;
    /// False when mean_shift >= nn_distance.
    bool guard_ok = true;
};

/// x_hat = clip(x + sigma * U[-1, 1]^d_in) per val sample with a seeded stream.
PerturbationReport perturbation_test(const Predictor& model, const Dataset& val, const Dataset& reference,
                                     double sigma, std::uint64_t seed);

/// Mean distance from each point to its nearest other point.
double mean_nearest_neighbor_distance(std::span<const double> x, std::size_t d_in);

struct SweepOptions {
    std::vector<double> fractions{0.1, 0.25, 0.5, 1.0};
    std::vector<double> lambdas{0.0, 0.05};
    std::vector<std::uint64_t> seeds{0};
    TrainOptions inverse;
    TrainOptions surrogate;
    unsigned threads = 1;
};

struct SweepRow {
    double fraction = 0;
    double lambda = 0;
    std::uint64_t seed = 0;
    std::size_t subset_size = 0;
    double val_image_mse = 0;
    double val_regression = 0;
};

/// Stage seeds used for one run seed; shared with the pipeline so a sweep
/// arm at fraction 1 reproduces the standard stages exactly.
struct StageSeeds {
    std::uint64_t data, wae, inverse, ensemble, surrogate, baseline, eval, sweep;
    static StageSeeds from(std::uint64_t seed);
};

/// For each (fraction, seed): inverse pretrained on the subset, then one
/// surrogate per lambda on the same subset. The WAE is the full-data model.
std::vector<SweepRow> small_data_sweep(const Dataset& train, const Dataset& val, const WaeModel& wae,
                                       const SweepOptions& options);

struct MetricsReport {
    std::string model;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<BandStat> bands;
    std::optional<double> mean_r2_scalars;
    std::optional<ConsistencyReport> consistency;
    std::optional<double> perturbation_sensitivity;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
void write_consistency_csv(const std::filesystem::path& path, const ConsistencyReport& report);
void write_perturbation_csv(const std::filesystem::path& path, const std::vector<std::pair<std::string, PerturbationReport>>& rows);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace macc
