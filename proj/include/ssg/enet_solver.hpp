#pragma once

#include <vector>

#include "ssg/model_core.hpp"

namespace ssg {

struct PenaltyWeights {
    double l1;
    double l2;
};

/// P1 = xi0 (1 - p_ij) |K_ii|,  P2 = p_ij K_ii^2 / (2 sigma1^2).
PenaltyWeights penalty_weights(double k_ii, double p_ij, double xi0, double sigma1);

/// Weighted elastic-net regression of one variable on the others:
///   minimize (1 / (2 noise_var)) ||response - design beta||^2
///            + sum_j l1_j |beta_j| + sum_j l2_j beta_j^2.
struct ColumnProblem {
    Vector response;
    Matrix design;
    double noise_var = 1.0;
    Vector l1_weights;
    Vector l2_weights;

    void validate() const;
};

struct SolverOptions {
    double tol = 1e-7;       // max coordinate change between sweeps
    double kkt_tol = 1e-6;   // subgradient residual required before stopping
    int max_sweeps = 10000;
    bool record_objective = false;
};

struct ColumnSolution {
    Vector beta;
    int sweeps = 0;
    double kkt_residual = 0.0;
    std::vector<double> objective_trace;  // after each sweep, when recorded
};

/// Normal-equation form of a column problem: gram = X^T X, xty = X^T y,
/// yty = y^T y. All column solves go through this.
ColumnSolution solve_normal_form(const Matrix& gram, const Vector& xty, double yty, double noise_var,
                                 const Vector& l1, const Vector& l2, const Vector& init,
                                 const SolverOptions& options);

/// Cyclic coordinate descent with closed-form soft-thresholded updates.
ColumnSolution solve_column(const ColumnProblem& problem, const Vector& init,
                            const SolverOptions& options = {});

double column_objective(const ColumnProblem& problem, const Vector& beta);

/// Largest violation of the subgradient optimality conditions at beta.
double kkt_residual(const ColumnProblem& problem, const Vector& beta);

struct ColumnUpdate {
    double k_ii;
    Vector k_offdiag;
};

/// K_ii = n / ||y - X beta||^2, K_ji = -beta_j K_ii.
ColumnUpdate update_column(const Vector& beta_hat, const Vector& response, const Matrix& design);

/// OR rule: keep, per pair, the entry with the larger magnitude (ties keep K_ij).
Matrix symmetrize_or(const Matrix& k_raw);

struct PrecisionUpdateOptions {
    SolverOptions solver;
    int threads = 1;
};

struct PrecisionUpdate {
    PrecisionEstimate precision;
    double max_kkt_residual = 0.0;
    int max_sweeps = 0;
};

/// One pass of the nodewise adaptive elastic net over all columns, followed by
/// OR symmetrization. Every column reads the same `current` snapshot, so the
/// result does not depend on the column order or thread count.
PrecisionUpdate update_precision(const ObservationMatrix& data, const VariationalState& state,
                                 const PrecisionEstimate& current, const Hyperparameters& hyper,
                                 const PrecisionUpdateOptions& options = {});

/// Same, with X^T X precomputed.
PrecisionUpdate update_precision(const ObservationMatrix& data, const Matrix& gram,
                                 const VariationalState& state, const PrecisionEstimate& current,
                                 const Hyperparameters& hyper, const PrecisionUpdateOptions& options);

/// Clamped p_ij for every ordered pair (symmetric, zero diagonal).
Matrix edge_weight_matrix(const VariationalState& state);

}  // namespace ssg
