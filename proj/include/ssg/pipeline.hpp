#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssg/calibrate.hpp"
#include "ssg/fdr_select.hpp"
#include "ssg/synthgen.hpp"
#include "ssg/vem_engine.hpp"

namespace ssg {

/// Data drawn from a benchmark topology instead of read from disk.
struct SyntheticSource {
    TopologySpec topology;
    int n = 100;
    double gamma = 0.3;
    double beta = 0.2;
};

struct RunConfig {
    std::optional<std::filesystem::path> input;
    std::optional<SyntheticSource> synthetic;
    /// Topologies swept by run_benchmark; the synthetic source supplies the rest of the spec.
    std::vector<TopologyKind> topologies{TopologyKind::hub, TopologyKind::sbm, TopologyKind::scale_free,
                                         TopologyKind::band};

    bool calibrate = true;
    CalibrationGrid grid;
    // Fixed hyperparameters, used when calibrate is false.
    double c = 2.0;
    double sigma1 = 0.5;
    int Q = 1;

    double alpha = 0.1;
    std::uint64_t seed = 1;
    int replications = 1;
    std::filesystem::path output_dir = "ssg_out";
    bool standardize = false;
    bool nonparanormal = false;
    std::optional<std::filesystem::path> labels;
    int threads = 1;

    int max_outer_iter = 50;
    int max_vem_iter = 20;
    double elbo_tol = 1e-5;
    double k_tol = 1e-5;
    double tau_damping = 0.5;
    std::optional<double> initial_edge_prob = 0.5;

    void validate() const;
    VemConfig vem_config() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Fields present in `j` override those of `base`; unknown keys are a SpecError.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// splitmix64 over (base, stream, index): independent per-replication seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

std::string library_version();

/// Loads (or simulates) the data and applies the configured preprocessing.
struct PreparedData {
    ObservationMatrix data;
    std::optional<GroundTruth> truth;
};
PreparedData prepare_data(const RunConfig& config);

struct InferenceResult {
    Hyperparameters hyper;
    FitResult fit;
    GraphDecision decision;
    std::optional<std::vector<BicRow>> bic_table;
    /// Worst KKT residual and VEM step over every fit run, calibration cells included.
    double max_kkt_residual = 0.0;
    double min_vem_step_delta = 0.0;
};

/// Fixed-hyperparameter fit or full calibration, then selection at config.alpha.
InferenceResult infer(const ObservationMatrix& data, const RunConfig& config,
                      const std::optional<std::vector<int>>& labels = std::nullopt);

/// infer() on the configured data, writing edges.csv, adjacency.csv, graph.dot,
/// clusters.csv, manifest.json and (when calibrating) bic_table.csv.
InferenceResult run_inference(const RunConfig& config);

void write_bic_table(const std::filesystem::path& path, const std::vector<BicRow>& rows);

/// Partial correlations of the lightly ridged sample covariance, ranked by
/// magnitude; the top `n_edges` pairs form the graph.
Adjacency partial_correlation_baseline(const ObservationMatrix& data, int n_edges);

struct BenchmarkRecord {
    TopologyKind topology = TopologyKind::band;
    int replication = 0;
    std::uint64_t seed = 0;
    double fdp = 0.0;
    double tdp = 0.0;
    int n_edges = 0;
    double baseline_fdp = 0.0;
    double baseline_tdp = 0.0;
    int selected_Q = 0;
    double max_kkt_residual = 0.0;
    double min_vem_step_delta = 0.0;
    bool nested = true;
    bool failed = false;
    std::string error;
    double runtime_seconds = 0.0;
};

struct BenchmarkSummary {
    TopologyKind topology = TopologyKind::band;
    int replications = 0;
    int failures = 0;
    double mean_fdp = 0.0;
    double median_fdp = 0.0;
    double mean_tdp = 0.0;
    double median_tdp = 0.0;
    double mean_baseline_tdp = 0.0;
};

/// Replaces the fit in run_benchmark; used to check the scoring plumbing.
using Selector = std::function<Adjacency(const GroundTruth&, const ObservationMatrix&)>;

/// Levels on which every benchmark fit is checked for nested selections.
std::vector<double> nesting_alpha_grid();

/// Rows sorted by (topology, replication). A failing replication is recorded
/// with failed = true and the run continues.
std::vector<BenchmarkRecord> run_benchmark(const RunConfig& config, const Selector& selector = {});
std::vector<BenchmarkSummary> summarize(const std::vector<BenchmarkRecord>& records);

/// benchmark.csv and summary.csv hold only seed-determined values; wall-clock
/// times go to timing.csv.
void write_benchmark(const std::filesystem::path& dir, const std::vector<BenchmarkRecord>& records,
                     const RunConfig& config);

}  // namespace ssg
