#include "ssg/enet_solver.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "ssg/parallel.hpp"

namespace ssg {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// Gradient of the smooth part at coordinate j, given g = X^T y - X^T X beta.
double smooth_gradient(double g_j, double beta_j, double inv_s2, double l2_j) {
    return -g_j * inv_s2 + 2.0 * l2_j * beta_j;
}

/// Minimum-norm subgradient component.
double subgradient(double g_j, double beta_j, double inv_s2, double l1_j, double l2_j) {
    const double grad = smooth_gradient(g_j, beta_j, inv_s2, l2_j);
    if (beta_j > 0.0) return grad + l1_j;
    if (beta_j < 0.0) return grad - l1_j;
    return soft_threshold(grad, l1_j);
}

double normal_form_objective(const Matrix& gram, const Vector& xty, double yty, double inv_s2,
                             const Vector& l1, const Vector& l2, const Vector& beta) {
    const double rss = std::max(0.0, yty - 2.0 * beta.dot(xty) + beta.dot(gram * beta));
    return 0.5 * inv_s2 * rss + l1.dot(beta.cwiseAbs()) + l2.dot(beta.cwiseAbs2());
}

void check_weights(const Vector& l1, const Vector& l2, Eigen::Index m) {
    if (l1.size() != m || l2.size() != m) {
        throw DomainError("penalty weight length does not match the design");
    }
    if (!l1.allFinite() || !l2.allFinite() || (l1.array() < 0.0).any() || (l2.array() < 0.0).any()) {
        throw DomainError("penalty weights must be finite and non-negative");
    }
}

}  // namespace

PenaltyWeights penalty_weights(double k_ii, double p_ij, double xi0, double sigma1) {
    if (!(k_ii > 0.0)) throw DomainError("penalty_weights: K_ii must be positive");
    if (!(p_ij >= 0.0 && p_ij <= 1.0)) throw DomainError("penalty_weights: p_ij outside [0, 1]");
    if (!(xi0 > 0.0) || !(sigma1 > 0.0)) throw DomainError("penalty_weights: xi0, sigma1 must be positive");
    return {xi0 * (1.0 - p_ij) * std::abs(k_ii), p_ij * k_ii * k_ii / (2.0 * sigma1 * sigma1)};
}

void ColumnProblem::validate() const {
    if (design.rows() != response.size()) {
        throw DomainError("column problem: response length does not match design rows");
    }
    if (!(noise_var > 0.0) || !std::isfinite(noise_var)) {
        throw DomainError("column problem: noise variance must be positive");
    }
    check_weights(l1_weights, l2_weights, design.cols());
}

ColumnSolution solve_normal_form(const Matrix& gram, const Vector& xty, double yty, double noise_var,
                                 const Vector& l1, const Vector& l2, const Vector& init,
                                 const SolverOptions& options) {
    const Eigen::Index m = gram.rows();
    check_weights(l1, l2, m);
    if (init.size() != m) {
        throw DomainError("solver initial point has the wrong length");
    }
    if (!(options.tol > 0.0)) {
        throw DomainError("solver tolerance must be positive");
    }
    const double inv_s2 = 1.0 / noise_var;

    ColumnSolution out;
    out.beta = init;
    Vector& beta = out.beta;
    Vector g = xty - gram * beta;

    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double gjj = gram(j, j);
            const double denom = gjj * inv_s2 + 2.0 * l2[j];
            const double old = beta[j];
            const double updated =
                denom > 0.0 ? soft_threshold((g[j] + gjj * old) * inv_s2, l1[j]) / denom : 0.0;
            if (updated != old) {
                const double delta = updated - old;
                g.noalias() -= delta * gram.col(j);
                beta[j] = updated;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        out.sweeps = sweep;
        if (options.record_objective) {
            out.objective_trace.push_back(normal_form_objective(gram, xty, yty, inv_s2, l1, l2, beta));
        }
        if (max_change < options.tol) {
            g = xty - gram * beta;  // drop accumulated drift before certifying
            double worst = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                worst = std::max(worst, std::abs(subgradient(g[j], beta[j], inv_s2, l1[j], l2[j])));
            }
            out.kkt_residual = worst;
            if (worst <= options.kkt_tol) {
                return out;
            }
        }
    }

    double sq = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        const double s = subgradient(g[j], beta[j], inv_s2, l1[j], l2[j]);
        sq += s * s;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double mu = std::max(0.0, eig.eigenvalues().minCoeff()) * inv_s2 + 2.0 * l2.minCoeff();
    const double gap = mu > 0.0 ? sq / (2.0 * mu) : std::numeric_limits<double>::infinity();
    throw IterationLimitError("coordinate descent did not converge within " +
                                  std::to_string(options.max_sweeps) + " sweeps",
                              beta, gap);
}

ColumnSolution solve_column(const ColumnProblem& problem, const Vector& init,
                            const SolverOptions& options) {
    problem.validate();
    const Matrix gram = problem.design.transpose() * problem.design;
    const Vector xty = problem.design.transpose() * problem.response;
    return solve_normal_form(gram, xty, problem.response.squaredNorm(), problem.noise_var,
                             problem.l1_weights, problem.l2_weights, init, options);
}

double column_objective(const ColumnProblem& problem, const Vector& beta) {
    const Vector r = problem.response - problem.design * beta;
    return 0.5 * r.squaredNorm() / problem.noise_var + problem.l1_weights.dot(beta.cwiseAbs()) +
           problem.l2_weights.dot(beta.cwiseAbs2());
}

double kkt_residual(const ColumnProblem& problem, const Vector& beta) {
    const Vector g = problem.design.transpose() * (problem.response - problem.design * beta);
    const double inv_s2 = 1.0 / problem.noise_var;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        worst = std::max(worst, std::abs(subgradient(g[j], beta[j], inv_s2, problem.l1_weights[j],
                                                     problem.l2_weights[j])));
    }
    return worst;
}

ColumnUpdate update_column(const Vector& beta_hat, const Vector& response, const Matrix& design) {
    if (design.cols() != beta_hat.size() || design.rows() != response.size()) {
        throw DomainError("update_column: dimension mismatch");
    }
    const double rss = (response - design * beta_hat).squaredNorm();
    if (!(rss > 1e-14 * response.squaredNorm()) || !(rss > 0.0)) {
        throw DegenerateFitError("nodewise regression interpolates its response (zero residual)");
    }
    const double k_ii = static_cast<double>(response.size()) / rss;
    return {k_ii, -beta_hat * k_ii};
}

Matrix symmetrize_or(const Matrix& k_raw) {
    if (k_raw.rows() != k_raw.cols()) {
        throw DomainError("symmetrize_or needs a square matrix");
    }
    Matrix K = k_raw;
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < K.cols(); ++j) {
            const double keep = std::abs(k_raw(i, j)) >= std::abs(k_raw(j, i)) ? k_raw(i, j) : k_raw(j, i);
            K(i, j) = K(j, i) = keep;
        }
    }
    return K;
}

Matrix edge_weight_matrix(const VariationalState& state) {
    const Eigen::Index p = state.tau.rows();
    const int Q = static_cast<int>(state.tau.cols());
    if (state.rho.p() != p || state.rho.Q() != Q) {
        throw DomainError("variational state dimensions disagree");
    }
    Matrix W = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double* b = state.rho.block(pair_index(i, j, p));
            double s = 0.0;
            for (int q = 0; q < Q; ++q) {
                double row = 0.0;
                for (int l = 0; l < Q; ++l) {
                    row += b[q * Q + l] * state.tau(j, l);
                }
                s += state.tau(i, q) * row;
            }
            W(i, j) = W(j, i) = clamp_prob(s);
        }
    }
    return W;
}

PrecisionUpdate update_precision(const ObservationMatrix& data, const VariationalState& state,
                                 const PrecisionEstimate& current, const Hyperparameters& hyper,
                                 const PrecisionUpdateOptions& options) {
    const Matrix& X = data.data();
    const Matrix gram = X.transpose() * X;
    return update_precision(data, gram, state, current, hyper, options);
}

PrecisionUpdate update_precision(const ObservationMatrix& data, const Matrix& gram,
                                 const VariationalState& state, const PrecisionEstimate& current,
                                 const Hyperparameters& hyper, const PrecisionUpdateOptions& options) {
    const Matrix& X = data.data();
    const Eigen::Index p = data.p();
    const Eigen::Index m = p - 1;
    if (current.p() != p || state.tau.rows() != p) {
        throw DomainError("update_precision: dimension mismatch");
    }
    const Matrix W = edge_weight_matrix(state);
    const Matrix& Kc = current.matrix();

    Matrix k_raw = Matrix::Zero(p, p);
    std::vector<double> kkt(static_cast<std::size_t>(p), 0.0);
    std::vector<int> sweeps(static_cast<std::size_t>(p), 0);

    parallel_for(static_cast<std::size_t>(p), options.threads, [&](std::size_t node) {
        const auto i = static_cast<Eigen::Index>(node);
        auto others = [i](Eigen::Index k) { return k < i ? k : k + 1; };
        Matrix sub(m, m);
        Vector xty(m), l1(m), l2(m), init(m);
        const double k_ii = Kc(i, i);
        for (Eigen::Index a = 0; a < m; ++a) {
            const Eigen::Index ja = others(a);
            for (Eigen::Index b = 0; b < m; ++b) {
                sub(a, b) = gram(ja, others(b));
            }
            xty[a] = gram(ja, i);
            const PenaltyWeights w = penalty_weights(k_ii, W(i, ja), hyper.xi0, hyper.sigma1);
            l1[a] = w.l1;
            l2[a] = w.l2;
            init[a] = -Kc(ja, i) / k_ii;
        }
        ColumnSolution sol;
        try {
            sol = solve_normal_form(sub, xty, gram(i, i), 1.0 / k_ii, l1, l2, init, options.solver);
        } catch (const IterationLimitError& e) {
            throw IterationLimitError("node " + std::to_string(i) + ": " + e.what(), e.last_iterate(),
                                      e.gap_estimate());
        }
        Vector resid = X.col(i);
        for (Eigen::Index a = 0; a < m; ++a) {
            if (sol.beta[a] != 0.0) {
                resid.noalias() -= sol.beta[a] * X.col(others(a));
            }
        }
        const double rss = resid.squaredNorm();
        if (!(rss > 1e-14 * gram(i, i)) || !(rss > 0.0)) {
            throw DegenerateFitError("node " + std::to_string(i) +
                                     ": nodewise regression interpolates its response (zero residual)");
        }
        const double k_new = static_cast<double>(data.n()) / rss;
        k_raw(i, i) = k_new;
        for (Eigen::Index a = 0; a < m; ++a) {
            k_raw(others(a), i) = -sol.beta[a] * k_new;
        }
        kkt[node] = sol.kkt_residual;
        sweeps[node] = sol.sweeps;
    });

    PrecisionUpdate out{PrecisionEstimate(symmetrize_or(k_raw)), 0.0, 0};
    for (std::size_t k = 0; k < kkt.size(); ++k) {
        out.max_kkt_residual = std::max(out.max_kkt_residual, kkt[k]);
        out.max_sweeps = std::max(out.max_sweeps, sweeps[k]);
    }
    return out;
}

}  // namespace ssg
