#include "ssg/vem_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ssg {

namespace {

constexpr double kLog2Pi = 1.83787706640934548356;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double binary_entropy(double r) { return -xlogx(r) - xlogx(1.0 - r); }

/// Neumaier-compensated sum: the bound adds thousands of O(1) pair terms into
/// totals near 1e4, and plain summation drifts by ~1e-9 between evaluations.
class Accumulator {
public:
    void add(double x) {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Expected complete-data log term of one pair for every block pair, plus the
/// entropy of the Bernoulli(rho) edge factor:
///   c_ql = rho (log w + log phi) + (1 - rho)(log(1 - w) + log g) + H(rho).
PairTensor pair_coefficients(const PrecisionEstimate& K, const BlockModelParameters& params,
                             const PairTensor& rho, const Hyperparameters& hyper) {
    const Eigen::Index p = K.p();
    const int Q = params.Q();
    const Matrix log_w = params.omega.array().log().matrix();
    const Matrix log_1mw = (1.0 - params.omega.array()).log().matrix();
    PairTensor c(p, Q);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const std::size_t pr = pair_index(i, j, p);
            const double lphi = log_gaussian_density(K(i, j), hyper.sigma1);
            const double lg = log_laplace_density(K(i, j), hyper.xi0);
            const double* r = rho.block(pr);
            double* out = c.block(pr);
            for (int q = 0; q < Q; ++q) {
                for (int l = 0; l < Q; ++l) {
                    const double rr = r[q * Q + l];
                    out[q * Q + l] = rr * (log_w(q, l) + lphi) + (1.0 - rr) * (log_1mw(q, l) + lg) +
                                     binary_entropy(rr);
                }
            }
        }
    }
    return c;
}

double tau_weighted_pair_sum(const PairTensor& c, const Matrix& tau) {
    const Eigen::Index p = tau.rows();
    const int Q = static_cast<int>(tau.cols());
    Accumulator total;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double* b = c.block(pair_index(i, j, p));
            for (int q = 0; q < Q; ++q) {
                for (int l = 0; l < Q; ++l) {
                    total.add(tau(i, q) * tau(j, l) * b[q * Q + l]);
                }
            }
        }
    }
    return total.value();
}

double z_term(const Matrix& tau, const Vector& pi) {
    return (tau * pi.array().log().matrix()).sum();
}

double tau_entropy(const Matrix& tau) {
    Accumulator h;
    for (Eigen::Index k = 0; k < tau.size(); ++k) {
        h.add(-xlogx(tau.data()[k]));
    }
    return h.value();
}

/// Variational part of the ELBO (everything that moves while K is fixed).
double variational_objective(const PrecisionEstimate& K, const Matrix& tau, const PairTensor& rho,
                             const BlockModelParameters& params, const Hyperparameters& hyper) {
    return z_term(tau, params.pi) + tau_entropy(tau) +
           tau_weighted_pair_sum(pair_coefficients(K, params, rho, hyper), tau);
}

double pseudo_loglik_of(const Matrix& gram, Eigen::Index n, const Matrix& K) {
    // ||X_i - X_-i beta_i||^2 = K_.i^T G K_.i / K_ii^2 with beta_i = -K_-i,i / K_ii.
    const double nn = static_cast<double>(n);
    const Matrix GK = gram * K;
    double total = 0.0;
    for (Eigen::Index i = 0; i < K.cols(); ++i) {
        const double kii = K(i, i);
        const double quad = K.col(i).dot(GK.col(i));
        total += -0.5 * nn * kLog2Pi + 0.5 * nn * std::log(kii) - 0.5 * quad / kii;
    }
    return total;
}

double diag_prior_of(const Matrix& K, double sigma1) {
    return static_cast<double>(K.rows()) * std::log(sigma1) - sigma1 * K.diagonal().sum();
}

std::vector<double> water_fill_pi(const Vector& mass) {
    // argmax sum_q N_q log pi_q over {pi_q >= eps, sum pi_q = 1}.
    const auto Q = static_cast<std::size_t>(mass.size());
    std::vector<double> pi(Q, 0.0);
    if (Q == 1) {
        pi[0] = 1.0;
        return pi;
    }
    std::vector<bool> pinned(Q, false);
    for (;;) {
        double free_mass = 0.0;
        std::size_t n_pinned = 0;
        for (std::size_t q = 0; q < Q; ++q) {
            if (pinned[q]) ++n_pinned;
            else free_mass += mass[static_cast<Eigen::Index>(q)];
        }
        const double budget = 1.0 - static_cast<double>(n_pinned) * kProbClamp;
        bool changed = false;
        for (std::size_t q = 0; q < Q; ++q) {
            if (pinned[q]) {
                pi[q] = kProbClamp;
                continue;
            }
            pi[q] = free_mass > 0.0 ? budget * mass[static_cast<Eigen::Index>(q)] / free_mass
                                    : budget / static_cast<double>(Q - n_pinned);
            if (pi[q] < kProbClamp) {
                pinned[q] = true;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return pi;
}

std::vector<int> kmeans(const Matrix& points, int k, std::uint64_t seed, double& inertia_out) {
    const Eigen::Index n = points.rows();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double best_inertia = std::numeric_limits<double>::infinity();
    std::vector<int> best;
    for (int restart = 0; restart < 10; ++restart) {
        // k-means++ seeding
        Matrix centers(k, points.cols());
        std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
        centers.row(0) = points.row(first(rng));
        Vector d2(n);
        for (int c = 1; c < k; ++c) {
            for (Eigen::Index i = 0; i < n; ++i) {
                double m = std::numeric_limits<double>::infinity();
                for (int cc = 0; cc < c; ++cc) {
                    m = std::min(m, (points.row(i) - centers.row(cc)).squaredNorm());
                }
                d2[i] = m;
            }
            const double total = d2.sum();
            Eigen::Index pick = 0;
            if (total > 0.0) {
                double target = u(rng) * total;
                for (pick = 0; pick < n - 1; ++pick) {
                    target -= d2[pick];
                    if (target <= 0.0) break;
                }
            }
            centers.row(c) = points.row(pick);
        }
        std::vector<int> assign(static_cast<std::size_t>(n), -1);
        double inertia = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            bool moved = false;
            inertia = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                int arg = 0;
                double m = std::numeric_limits<double>::infinity();
                for (int c = 0; c < k; ++c) {
                    const double d = (points.row(i) - centers.row(c)).squaredNorm();
                    if (d < m) {
                        m = d;
                        arg = c;
                    }
                }
                inertia += m;
                if (assign[static_cast<std::size_t>(i)] != arg) {
                    assign[static_cast<std::size_t>(i)] = arg;
                    moved = true;
                }
            }
            Matrix sums = Matrix::Zero(k, points.cols());
            Vector counts = Vector::Zero(k);
            for (Eigen::Index i = 0; i < n; ++i) {
                sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
                counts[assign[static_cast<std::size_t>(i)]] += 1.0;
            }
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
            }
            if (!moved) break;
        }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            best = assign;
        }
    }
    inertia_out = best_inertia;
    return best;
}

}  // namespace

void VemConfig::validate() const {
    if (max_outer_iter < 1 || max_vem_iter < 1 || max_fixed_point_iter < 1) {
        throw DomainError("iteration caps must be >= 1");
    }
    if (!(elbo_tol > 0.0) || !(k_tol > 0.0) || !(fixed_point_tol > 0.0)) {
        throw DomainError("tolerances must be positive");
    }
    if (!(tau_damping >= 0.0 && tau_damping < 1.0)) {
        throw DomainError("tau damping must lie in [0, 1)");
    }
    if (initial_edge_prob && !(*initial_edge_prob > 0.0 && *initial_edge_prob < 1.0)) {
        throw DomainError("initial edge probability must lie in (0, 1)");
    }
}

Matrix one_hot(const std::vector<int>& labels, int Q) {
    Matrix tau = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), Q);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= Q) {
            throw DomainError("label outside [0, Q)");
        }
        tau(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return tau;
}

PairTensor e_step_rho(const PrecisionEstimate& K, const BlockModelParameters& params,
                      const Hyperparameters& hyper) {
    const Eigen::Index p = K.p();
    const int Q = params.Q();
    PairTensor rho(p, Q);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            double* b = rho.block(pair_index(i, j, p));
            for (int q = 0; q < Q; ++q) {
                for (int l = 0; l < Q; ++l) {
                    b[q * Q + l] = posterior_edge_prob(K(i, j), params.omega(q, l), hyper.xi0, hyper.sigma1);
                }
            }
        }
    }
    return rho;
}

TauUpdate e_step_tau(const PrecisionEstimate& K, const BlockModelParameters& params,
                     const PairTensor& rho, const Matrix& tau_init, const Hyperparameters& hyper,
                     const VemConfig& config) {
    const Eigen::Index p = K.p();
    const int Q = params.Q();
    if (tau_init.rows() != p || tau_init.cols() != Q) {
        throw DomainError("e_step_tau: tau has the wrong shape");
    }
    TauUpdate out{tau_init, 0, false};
    if (Q == 1) {
        out.tau.setOnes();
        out.converged = true;
        return out;
    }
    const PairTensor c = pair_coefficients(K, params, rho, hyper);
    const Vector log_pi = params.pi.array().log().matrix();
    Matrix& tau = out.tau;
    Vector s(Q);
    for (int sweep = 1; sweep <= config.max_fixed_point_iter; ++sweep) {
        double max_change = 0.0;
        // Gauss-Seidel over nodes: each node takes its exact conditional optimum
        // given the others (then damped), so the bound cannot decrease.
        for (Eigen::Index i = 0; i < p; ++i) {
            s = log_pi;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (j == i) continue;
                if (i < j) {
                    const double* b = c.block(pair_index(i, j, p));
                    for (int q = 0; q < Q; ++q) {
                        double acc = 0.0;
                        for (int l = 0; l < Q; ++l) acc += b[q * Q + l] * tau(j, l);
                        s[q] += acc;
                    }
                } else {
                    const double* b = c.block(pair_index(j, i, p));
                    for (int q = 0; q < Q; ++q) {
                        double acc = 0.0;
                        for (int l = 0; l < Q; ++l) acc += b[l * Q + q] * tau(j, l);
                        s[q] += acc;
                    }
                }
            }
            const double m = s.maxCoeff();
            Vector target = (s.array() - m).exp().matrix();
            target /= target.sum();
            for (int q = 0; q < Q; ++q) {
                const double updated = (1.0 - config.tau_damping) * target[q] + config.tau_damping * tau(i, q);
                max_change = std::max(max_change, std::abs(updated - tau(i, q)));
                tau(i, q) = updated;
            }
            tau.row(i) /= tau.row(i).sum();
        }
        out.sweeps = sweep;
        if (max_change < config.fixed_point_tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

ThetaUpdate m_step_theta(const Matrix& tau, const PairTensor& rho) {
    const Eigen::Index p = tau.rows();
    const int Q = static_cast<int>(tau.cols());
    if (rho.p() != p || rho.Q() != Q) {
        throw DomainError("m_step_theta: tau and rho disagree");
    }
    ThetaUpdate out;
    const auto pi = water_fill_pi(tau.colwise().sum().transpose());
    out.params.pi = Eigen::Map<const Vector>(pi.data(), Q);

    Matrix num = Matrix::Zero(Q, Q);
    Matrix den = Matrix::Zero(Q, Q);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double* b = rho.block(pair_index(i, j, p));
            for (int q = 0; q < Q; ++q) {
                const double tq = tau(i, q);
                for (int l = 0; l < Q; ++l) {
                    const double w = tq * tau(j, l);
                    num(q, l) += w * b[q * Q + l];
                    den(q, l) += w;
                }
            }
        }
    }
    out.params.omega.resize(Q, Q);
    for (int q = 0; q < Q; ++q) {
        for (int l = q; l < Q; ++l) {
            const double nn = q == l ? num(q, q) : num(q, l) + num(l, q);
            const double dd = q == l ? den(q, q) : den(q, l) + den(l, q);
            double w;
            // Any positive weight still pins the maximizer; only a block pair
            // with no weight at all leaves omega free.
            if (dd < kProbClamp) out.empty_block = true;
            w = dd > 0.0 ? clamp_prob(nn / dd) : 0.5;
            out.params.omega(q, l) = out.params.omega(l, q) = w;
        }
    }
    return out;
}

ElboTerms elbo(const ObservationMatrix& data, const PrecisionEstimate& K, const Matrix& tau,
               const PairTensor& rho, const BlockModelParameters& params, const Hyperparameters& hyper) {
    const Eigen::Index p = K.p();
    const int Q = params.Q();
    if (data.p() != p || tau.rows() != p || tau.cols() != Q || rho.p() != p || rho.Q() != Q) {
        throw DomainError("elbo: dimension mismatch");
    }
    ElboTerms t;
    const Matrix gram = data.data().transpose() * data.data();
    t.pseudo_loglik = pseudo_loglik_of(gram, data.n(), K.matrix());
    t.diag_prior = diag_prior_of(K.matrix(), hyper.sigma1);
    t.z_term = z_term(tau, params.pi);
    t.entropy_tau = tau_entropy(tau);

    const Matrix log_w = params.omega.array().log().matrix();
    const Matrix log_1mw = (1.0 - params.omega.array()).log().matrix();
    Accumulator a_term, k_term, entropy_rho;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double* r = rho.block(pair_index(i, j, p));
            const double lphi = log_gaussian_density(K(i, j), hyper.sigma1);
            const double lg = log_laplace_density(K(i, j), hyper.xi0);
            for (int q = 0; q < Q; ++q) {
                for (int l = 0; l < Q; ++l) {
                    const double w = tau(i, q) * tau(j, l);
                    const double rr = r[q * Q + l];
                    a_term.add(w * (rr * log_w(q, l) + (1.0 - rr) * log_1mw(q, l)));
                    k_term.add(w * (rr * lphi + (1.0 - rr) * lg));
                    entropy_rho.add(w * binary_entropy(rr));
                }
            }
        }
    }
    t.a_term = a_term.value();
    t.k_term = k_term.value();
    t.entropy_rho = entropy_rho.value();
    return t;
}

Matrix shrunk_partial_correlation(const Matrix& S, double shrink) {
    Matrix Sr = (1.0 - shrink) * S;
    Sr.diagonal() = S.diagonal();
    Eigen::LLT<Matrix> llt(Sr);
    if (llt.info() != Eigen::Success) {
        throw FactorizationError("shrunk covariance is not positive definite");
    }
    const Matrix omega = llt.solve(Matrix::Identity(S.rows(), S.cols()));
    const Vector d = omega.diagonal().cwiseSqrt().cwiseInverse();
    Matrix P = -(d.asDiagonal() * omega * d.asDiagonal());
    P.diagonal().setOnes();
    return 0.5 * (P + P.transpose());
}

Matrix spectral_tau(const Matrix& affinity, int Q, std::uint64_t seed) {
    const Eigen::Index p = affinity.rows();
    if (Q == 1) {
        return Matrix::Ones(p, 1);
    }
    auto fallback = [&] {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 0.1);
        Matrix tau(p, Q);
        for (Eigen::Index i = 0; i < p; ++i) {
            for (int q = 0; q < Q; ++q) tau(i, q) = 1.0 + u(rng);
            tau.row(i) /= tau.row(i).sum();
        }
        return tau;
    };
    if (Q > p) {
        return fallback();
    }
    Matrix W = affinity.cwiseAbs();
    W.diagonal().setZero();
    // Regularized Laplacian: a constant floor of average-degree / p keeps
    // isolated nodes from dominating the leading eigenvectors.
    const double floor = W.sum() / static_cast<double>(p * p);
    if (!(floor > 0.0)) {
        return fallback();
    }
    W.array() += floor;
    W.diagonal().setZero();
    const Vector deg = W.rowwise().sum();
    const Vector dm = deg.cwiseSqrt().cwiseInverse();
    const Matrix M = dm.asDiagonal() * W * dm.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
    if (eig.info() != Eigen::Success) {
        return fallback();
    }
    Matrix U = eig.eigenvectors().rightCols(Q);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double nrm = U.row(i).norm();
        if (nrm > 0.0) U.row(i) /= nrm;
    }
    double inertia = 0.0;
    const auto labels = kmeans(U, Q, seed, inertia);
    std::vector<int> sizes(static_cast<std::size_t>(Q), 0);
    for (int z : labels) ++sizes[static_cast<std::size_t>(z)];
    if (*std::min_element(sizes.begin(), sizes.end()) == 0) {
        return fallback();
    }
    return 0.8 * one_hot(labels, Q) + Matrix::Constant(p, Q, 0.2 / Q);
}

Matrix initial_tau(const Matrix& S, int Q, std::uint64_t seed) {
    if (Q == 1) {
        return Matrix::Ones(S.rows(), 1);
    }
    return spectral_tau(shrunk_partial_correlation(S, 0.3), Q, seed);
}

Matrix partial_correlation_of(const Matrix& K) {
    const Vector d = K.diagonal().cwiseSqrt().cwiseInverse();
    Matrix P = -(d.asDiagonal() * K * d.asDiagonal());
    P.diagonal().setOnes();
    return P;
}

FitResult fit(const ObservationMatrix& data, const Hyperparameters& hyper, const VemConfig& config) {
    hyper.validate();
    config.validate();
    const Eigen::Index p = data.p();
    const int Q = hyper.Q;
    const Matrix& X = data.data();
    const Matrix gram = X.transpose() * X;
    const Matrix S = gram / static_cast<double>(data.n());

    if (!(S.diagonal().array() > 0.0).all()) {
        throw NumericError("a data column has zero second moment");
    }
    Matrix K0 = Matrix::Zero(p, p);
    K0.diagonal() = S.diagonal().cwiseInverse();
    PrecisionEstimate K(K0);

    Matrix tau;
    const bool tau_fixed = config.fixed_labels.has_value();
    if (tau_fixed) {
        if (static_cast<Eigen::Index>(config.fixed_labels->size()) != p) {
            throw DomainError("known labels must have length p");
        }
        tau = one_hot(*config.fixed_labels, Q);
    }

    FitResult result;
    FitDiagnostics& diag = result.diagnostics;
    diag.min_vem_step_delta = std::numeric_limits<double>::infinity();
    PrecisionUpdateOptions k_opts{config.solver, config.threads};

    PairTensor rho = config.initial_edge_prob
                         ? PairTensor(p, Q, clamp_prob(*config.initial_edge_prob))
                         : e_step_rho(K, BlockModelParameters::uniform(Q), hyper);
    // With a constant starting rho the first precision update does not depend
    // on tau, so it is computed up front and its partial correlations (far
    // less noisy than the sample ones when n ~ p) seed the block labels.
    std::optional<PrecisionUpdate> first;
    if (config.initial_edge_prob) {
        first = update_precision(data, gram, VariationalState{Matrix::Constant(p, Q, 1.0 / Q), rho}, K, hyper,
                                 k_opts);
    }
    if (config.initial_labels && !tau_fixed) {
        if (static_cast<Eigen::Index>(config.initial_labels->size()) != p) {
            throw DomainError("initial labels must have length p");
        }
        tau = 0.8 * one_hot(*config.initial_labels, Q) + Matrix::Constant(p, Q, 0.2 / Q);
    } else if (!tau_fixed) {
        tau = first ? spectral_tau(partial_correlation_of(first->precision.matrix()), Q, config.seed)
                    : initial_tau(S, Q, config.seed);
    }
    ThetaUpdate theta = m_step_theta(tau, rho);
    diag.empty_block = theta.empty_block;
    BlockModelParameters params = theta.params;
    if (!config.initial_edge_prob) rho = e_step_rho(K, params, hyper);

    struct Snapshot {
        PrecisionEstimate K;
        Matrix tau;
        PairTensor rho;
        BlockModelParameters params;
        double elbo;
    };
    std::optional<Snapshot> best;
    double prev_elbo = std::numeric_limits<double>::quiet_NaN();

    for (int t = 1; t <= config.max_outer_iter; ++t) {
        PrecisionUpdate upd = (t == 1 && first)
                                  ? std::move(*first)
                                  : update_precision(data, gram, VariationalState{tau, rho}, K, hyper, k_opts);
        diag.max_kkt_residual = std::max(diag.max_kkt_residual, upd.max_kkt_residual);
        const double dK = (upd.precision.matrix() - K.matrix()).cwiseAbs().maxCoeff();
        K = std::move(upd.precision);

        double J = variational_objective(K, tau, rho, params, hyper);
        auto record = [&](double next) {
            diag.min_vem_step_delta = std::min(diag.min_vem_step_delta, next - J);
            ++diag.vem_steps;
            J = next;
        };
        for (int round = 0; round < config.max_vem_iter; ++round) {
            const double start = J;
            rho = e_step_rho(K, params, hyper);
            record(variational_objective(K, tau, rho, params, hyper));
            if (!tau_fixed) {
                TauUpdate tu = e_step_tau(K, params, rho, tau, hyper, config);
                diag.tau_converged = diag.tau_converged && tu.converged;
                tau = std::move(tu.tau);
                record(variational_objective(K, tau, rho, params, hyper));
            }
            theta = m_step_theta(tau, rho);
            diag.empty_block = diag.empty_block || theta.empty_block;
            params = theta.params;
            record(variational_objective(K, tau, rho, params, hyper));
            if (std::abs(J - start) <= 1e-10 * std::max(1.0, std::abs(J))) {
                break;
            }
        }

        const double total = pseudo_loglik_of(gram, data.n(), K.matrix()) +
                             diag_prior_of(K.matrix(), hyper.sigma1) + J;
        result.elbo_trace.push_back(total);
        result.iterations = t;
        if (config.on_iteration) {
            config.on_iteration(OuterTrace{t, total, dK});
        }
        if (!best || total > best->elbo) {
            best = Snapshot{K, tau, rho, params, total};
        }
        if (t > 1 && std::abs(total - prev_elbo) < config.elbo_tol * std::abs(prev_elbo) && dK < config.k_tol) {
            result.converged = true;
            break;
        }
        prev_elbo = total;
    }

    if (result.converged) {
        result.precision = std::move(K);
        result.state = VariationalState{std::move(tau), std::move(rho)};
        result.params = std::move(params);
    } else {
        result.precision = std::move(best->K);
        result.state = VariationalState{std::move(best->tau), std::move(best->rho)};
        result.params = std::move(best->params);
    }
    if (diag.vem_steps == 0) diag.min_vem_step_delta = 0.0;
    return result;
}

}  // namespace ssg
