#pragma once

#include <vector>

#include "ssg/model_core.hpp"
#include "ssg/vem_engine.hpp"

namespace ssg {

/// Per-pair values are stored for i < j in row-major pair order (see pair_index).
struct GraphDecision {
    std::vector<double> l_values;
    std::vector<double> q_values;
    Adjacency adjacency;
    double alpha = 0.0;
    std::vector<int> z_hat;
};

/// Z_i = argmax_q tau_iq, ties to the smallest index. Labels are 0-based.
std::vector<int> map_clusters(const Matrix& tau);

/// l_ij = P(A_ij = 0 | K_ij, Z_i, Z_j; theta).
std::vector<double> l_values(const PrecisionEstimate& K, const std::vector<int>& z_hat,
                             const BlockModelParameters& params, const Hyperparameters& hyper);

/// Running mean of the sorted l-values: q_ij = mean{l_kl : l_kl <= l_ij}.
std::vector<double> q_values(const std::vector<double>& l_values);

/// A_ij = 1{q_ij <= alpha}.
Adjacency select_graph(const std::vector<double>& q_values, Eigen::Index p, double alpha);

/// l-values, q-values and the level-alpha graph from a fitted model.
GraphDecision decide(const FitResult& fit, const Hyperparameters& hyper, double alpha);

struct DiscoveryRates {
    double fdp;
    double tdp;  // NaN when the truth has no edge
};

DiscoveryRates fdp_tdp(const Adjacency& estimated, const Adjacency& truth);

/// Model-exact marginal FDR of the rule {l <= t} under the fitted prior.
double oracle_mfdr(double t, const std::vector<int>& z_hat, const BlockModelParameters& params,
                   const Hyperparameters& hyper);

/// Interval of |k| on which the l-value is at most t, for one block pair.
/// Empty when lo > hi.
struct AbsInterval {
    double lo;
    double hi;
};
AbsInterval l_value_region(double t, double omega, double xi0, double sigma1);

int edge_count(const Adjacency& A);

}  // namespace ssg
