#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ssg/enet_solver.hpp"
#include "ssg/model_core.hpp"

namespace ssg {

/// One line of the optional iteration trace.
struct OuterTrace {
    int iteration;
    double elbo;
    double max_k_change;
};

struct VemConfig {
    int max_outer_iter = 50;
    int max_vem_iter = 20;          // (rho, tau, theta) rounds per outer iteration
    int max_fixed_point_iter = 100; // tau sweeps per E-step
    double fixed_point_tol = 1e-6;
    double elbo_tol = 1e-5;
    double k_tol = 1e-5;
    double tau_damping = 0.5;
    /// Edge probability used for rho before the first precision update. The
    /// diagonal starting K says nothing about edges, and deriving rho from it
    /// pins omega near the spike mass at zero, which the lasso then locks in.
    /// Unset: rho is computed from the diagonal K with omega = 1/2.
    std::optional<double> initial_edge_prob = 0.5;
    std::uint64_t seed = 1;
    int threads = 1;
    SolverOptions solver;
    /// Known block labels: tau is pinned to the one-hot labels and the tau E-step is skipped.
    std::optional<std::vector<int>> fixed_labels;
    /// Starting block labels; tau is free to move away from them.
    std::optional<std::vector<int>> initial_labels;
    std::function<void(const OuterTrace&)> on_iteration;

    void validate() const;
};

/// Independent pieces of the evidence lower bound.
struct ElboTerms {
    double pseudo_loglik = 0.0;  // sum_i log p(X_i | X_-i, K)
    double diag_prior = 0.0;     // sum_i log Exp(K_ii; sigma1)
    double z_term = 0.0;         // E log p(Z)
    double a_term = 0.0;         // E log p(A | Z)
    double k_term = 0.0;         // E log p(K_offdiag | A)
    double entropy_tau = 0.0;
    double entropy_rho = 0.0;

    /// Part that changes during a VEM round with K fixed.
    double variational() const { return z_term + a_term + k_term + entropy_tau + entropy_rho; }
    double total() const { return pseudo_loglik + diag_prior + variational(); }
};

struct FitDiagnostics {
    double max_kkt_residual = 0.0;
    /// Smallest ELBO increment over every individual VEM step (negative = decrease).
    double min_vem_step_delta = 0.0;
    long vem_steps = 0;
    bool tau_converged = true;
    bool empty_block = false;
};

struct FitResult {
    PrecisionEstimate precision;
    VariationalState state;
    BlockModelParameters params;
    std::vector<double> elbo_trace;
    int iterations = 0;
    bool converged = false;
    FitDiagnostics diagnostics;
};

struct TauUpdate {
    Matrix tau;
    int sweeps = 0;
    bool converged = false;
};

struct ThetaUpdate {
    BlockModelParameters params;
    bool empty_block = false;
};

/// rho^{ij}_{ql} = posterior_edge_prob(K_ij, omega_ql) for every pair and block pair.
PairTensor e_step_rho(const PrecisionEstimate& K, const BlockModelParameters& params,
                      const Hyperparameters& hyper);

/// Damped mean-field fixed point for tau, node by node:
///   log tau_iq = log pi_q + sum_{j != i} sum_l tau_jl c^{ij}_{ql} + const,
/// with c the expected complete-data log term of the pair under rho.
TauUpdate e_step_tau(const PrecisionEstimate& K, const BlockModelParameters& params,
                     const PairTensor& rho, const Matrix& tau_init, const Hyperparameters& hyper,
                     const VemConfig& config);

/// pi_q = mean_i tau_iq, omega_ql = rho average weighted by tau_iq tau_jl,
/// both maximized over the clamped box.
ThetaUpdate m_step_theta(const Matrix& tau, const PairTensor& rho);

ElboTerms elbo(const ObservationMatrix& data, const PrecisionEstimate& K, const Matrix& tau,
               const PairTensor& rho, const BlockModelParameters& params, const Hyperparameters& hyper);

/// Alternates the adaptive elastic-net precision update with VEM rounds.
FitResult fit(const ObservationMatrix& data, const Hyperparameters& hyper, const VemConfig& config = {});

/// Partial correlations of the shrunk covariance (1 - s) S + s diag(S).
Matrix shrunk_partial_correlation(const Matrix& S, double shrink);

/// Spectral clustering (regularized normalized affinity, k-means on the
/// leading eigenvectors) of |affinity|; labels are softened to 0.8 + 0.2/Q.
Matrix spectral_tau(const Matrix& affinity, int Q, std::uint64_t seed);

/// -K_ij / sqrt(K_ii K_jj), unit diagonal.
Matrix partial_correlation_of(const Matrix& K);

/// Initial tau from spectral clustering of |partial correlation|; falls back to
/// uniform rows with seeded jitter when the clustering degenerates.
Matrix initial_tau(const Matrix& S, int Q, std::uint64_t seed);

Matrix one_hot(const std::vector<int>& labels, int Q);

}  // namespace ssg
