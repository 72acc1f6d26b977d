#pragma once

#include <optional>
#include <vector>

#include "ssg/fdr_select.hpp"
#include "ssg/vem_engine.hpp"

namespace ssg {

struct CalibrationGrid {
    std::vector<double> c_grid{0.5, 1.0, 2.0};
    std::vector<double> sigma_grid{0.25, 0.5, 1.0};
    double sigma_lower = 0.1;
    double sigma_upper = 2.0;
    int q_min = 1;
    int q_max = 5;
    double alpha = 0.1;

    void validate() const;
    std::size_t cell_count() const;
};

/// xi0 = c sqrt(n log p).
double spike_from_constant(double c, Eigen::Index n, Eigen::Index p);

/// Sum over nodes of the Gaussian log-likelihood of the OLS refit of X_i on its
/// neighbours in `adjacency`, with sigma_i^2 = RSS_i / n.
double pseudo_loglik_graph(const ObservationMatrix& data, const Adjacency& adjacency);

/// -2 loglik + log(n) * edges.
double bic_hyper(double pseudo_loglik, int n_edges, Eigen::Index n);
double bic_hyper(const ObservationMatrix& data, const Adjacency& adjacency, Eigen::Index n);

/// -2 loglik + (Q - 1) log p + Q (Q + 1) / 2 * log(p (p - 1) / 2).
double bic_q(double pseudo_loglik, int Q, Eigen::Index p);
double bic_q(const ObservationMatrix& data, const Adjacency& adjacency, int Q, Eigen::Index p);
double bic_q_penalty(int Q, Eigen::Index p);

struct BicRow {
    int Q = 0;
    double c = 0.0;
    double xi0 = 0.0;
    double sigma1 = 0.0;
    int n_edges = 0;
    double pseudo_loglik = 0.0;
    double bic_hyper = 0.0;
    double bic_q = 0.0;
    double max_kkt_residual = 0.0;
    double min_vem_step_delta = 0.0;
    bool failed = false;
};

struct CalibrationResult {
    int best_Q = 0;
    double best_c = 0.0;
    double best_xi0 = 0.0;
    double best_sigma1 = 0.0;
    FitResult best_fit;
    GraphDecision best_decision;
    std::vector<BicRow> bic_table;  // ordered by (Q, c, sigma1)
};

/// Fits every (Q, c, sigma1) cell, keeps the BIC-best (c, sigma1) per Q, then
/// picks Q by BIC_Q. Cell k runs with seed config.seed + k. Ties resolve to
/// the lexicographically smallest (Q, c, sigma1).
CalibrationResult calibrate_all(const ObservationMatrix& data, const CalibrationGrid& grid,
                                const VemConfig& config);

}  // namespace ssg
