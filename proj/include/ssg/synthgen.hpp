#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssg/model_core.hpp"

namespace ssg {

enum class TopologyKind { hub, sbm, scale_free, band };

std::string to_string(TopologyKind kind);
TopologyKind topology_from_string(const std::string& name);

/// Generating law of a benchmark graph. Only the fields of `kind` are read.
struct TopologySpec {
    TopologyKind kind = TopologyKind::band;
    int p = 100;
    int n_hubs = 3;
    int q_true = 3;
    double within_prob = 0.1;
    double between_prob = 0.01;
    int attachment_count = 1;
    int bandwidth = 1;

    void validate() const;
};

struct GroundTruth {
    Adjacency adjacency;
    Matrix precision;
    std::vector<int> labels;  // empty unless the topology has planted blocks
};

/// Symmetric 0/1 adjacency with zero diagonal; deterministic in (spec, seed).
Adjacency generate_topology(const TopologySpec& spec, std::uint64_t seed);

/// Planted block labels for the sbm topology (contiguous equal-size blocks).
std::vector<int> sbm_labels(const TopologySpec& spec);

/// K0 = gamma A + (|lambda_min(gamma A)| + beta) I.
Matrix precision_from_adjacency(const Adjacency& adjacency, double gamma, double beta);

GroundTruth generate_ground_truth(const TopologySpec& spec, double gamma, double beta,
                                  std::uint64_t seed);

/// n i.i.d. rows from N(0, precision^{-1}).
ObservationMatrix sample_gaussian(const Matrix& precision, int n, std::uint64_t seed);

/// One draw (Z, A, K) from the hierarchical prior given theta. Off-diagonal
/// entries follow the spike/slab law exactly; the diagonal is inflated until K
/// is positive definite with smallest eigenvalue `min_eigenvalue`.
struct PriorDraw {
    std::vector<int> labels;
    Adjacency adjacency;
    Matrix precision;
};
PriorDraw draw_from_prior(Eigen::Index p, const BlockModelParameters& theta, double xi0,
                          double sigma1, double min_eigenvalue, std::uint64_t seed);

}  // namespace ssg
