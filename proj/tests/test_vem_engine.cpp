#include <cmath>
#include <random>

#include "doctest.h"
#include "ssg/fdr_select.hpp"
#include "ssg/synthgen.hpp"
#include "ssg/vem_engine.hpp"

using namespace ssg;

namespace {

double h(double x) { return x > 0.0 ? -x * std::log(x) : 0.0; }

PrecisionEstimate small_precision() {
    Matrix K(6, 6);
    K.setZero();
    K.diagonal() << 1.2, 0.9, 1.5, 1.1, 0.8, 1.3;
    const double off[][3] = {{0, 1, 0.45}, {0, 2, -0.02}, {1, 3, 0.3}, {2, 4, 0.01}, {3, 5, -0.5}, {4, 5, 0.2}};
    for (const auto& e : off) {
        K(int(e[0]), int(e[1])) = K(int(e[1]), int(e[0])) = e[2];
    }
    return PrecisionEstimate(K);
}

Matrix random_tau(Eigen::Index p, int Q, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix tau(p, Q);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (int q = 0; q < Q; ++q) tau(i, q) = u(rng);
        tau.row(i) /= tau.row(i).sum();
    }
    return tau;
}

ObservationMatrix band_data(int p, int n, std::uint64_t seed) {
    TopologySpec spec;
    spec.kind = TopologyKind::band;
    spec.p = p;
    const GroundTruth t = generate_ground_truth(spec, 0.3, 0.2, seed);
    return sample_gaussian(t.precision, n, seed + 1);
}

}  // namespace

TEST_CASE("rho E-step is the pointwise posterior edge probability") {
    const PrecisionEstimate K = small_precision();
    BlockModelParameters theta = BlockModelParameters::uniform(2);
    theta.omega << 0.3, 0.05, 0.05, 0.6;
    const Hyperparameters hyper{8.0, 0.5, 2, 0.1};
    const PairTensor rho = e_step_rho(K, theta, hyper);
    for (int i = 0; i < 6; ++i) {
        for (int j = i + 1; j < 6; ++j) {
            for (int q = 0; q < 2; ++q) {
                for (int l = 0; l < 2; ++l) {
                    CHECK(rho.at(i, j, q, l) == posterior_edge_prob(K(i, j), theta.omega(q, l), 8.0, 0.5));
                }
            }
        }
    }
}

TEST_CASE("tau E-step") {
    const PrecisionEstimate K = small_precision();
    const Hyperparameters hyper{8.0, 0.5, 2, 0.1};
    VemConfig cfg;
    SUBCASE("a single block is trivially all ones") {
        const BlockModelParameters theta = BlockModelParameters::uniform(1);
        const Hyperparameters h1{8.0, 0.5, 1, 0.1};
        const TauUpdate u = e_step_tau(K, theta, e_step_rho(K, theta, h1), Matrix::Constant(6, 1, 1.0), h1, cfg);
        CHECK(u.tau == Matrix::Ones(6, 1));
    }
    SUBCASE("blocks that share omega leave only the prior") {
        BlockModelParameters theta = BlockModelParameters::uniform(2);
        theta.pi << 0.7, 0.3;
        theta.omega.setConstant(0.2);
        cfg.tau_damping = 0.0;
        const TauUpdate u = e_step_tau(K, theta, e_step_rho(K, theta, hyper), random_tau(6, 2, 3), hyper, cfg);
        CHECK(u.converged);
        for (int i = 0; i < 6; ++i) {
            CHECK(u.tau(i, 0) == doctest::Approx(0.7).epsilon(1e-9));
        }
    }
    SUBCASE("rows stay on the simplex") {
        BlockModelParameters theta = BlockModelParameters::uniform(3);
        theta.omega << 0.5, 0.01, 0.02, 0.01, 0.4, 0.03, 0.02, 0.03, 0.2;
        const TauUpdate u = e_step_tau(K, theta, e_step_rho(K, theta, hyper), random_tau(6, 3, 4), hyper, cfg);
        for (int i = 0; i < 6; ++i) {
            CHECK(u.tau.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(u.tau.row(i).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("theta M-step against a brute-force sum over ordered pairs") {
    const Eigen::Index p = 6;
    const int Q = 2;
    const Matrix tau = random_tau(p, Q, 9);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PairTensor rho(p, Q);
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            for (int q = 0; q < Q; ++q) {
                for (int l = 0; l < Q; ++l) rho.at(i, j, q, l) = u(rng);
            }
        }
    }
    const ThetaUpdate t = m_step_theta(tau, rho);
    for (int q = 0; q < Q; ++q) {
        CHECK(t.params.pi[q] == doctest::Approx(tau.col(q).mean()).epsilon(1e-12));
        for (int l = 0; l < Q; ++l) {
            double num = 0.0, den = 0.0;
            for (int i = 0; i < p; ++i) {
                for (int j = 0; j < p; ++j) {
                    if (i == j) continue;
                    num += tau(i, q) * tau(j, l) * rho.at(i, j, q, l);
                    den += tau(i, q) * tau(j, l);
                }
            }
            CHECK(t.params.omega(q, l) == doctest::Approx(num / den).epsilon(1e-12));
        }
    }
    CHECK_FALSE(t.empty_block);
}

TEST_CASE("theta M-step flags an empty block") {
    Matrix tau = Matrix::Zero(4, 2);
    tau.col(0).setOnes();
    const ThetaUpdate t = m_step_theta(tau, PairTensor(4, 2, 0.3));
    CHECK(t.empty_block);
    CHECK(t.params.pi[1] == kProbClamp);
    CHECK(t.params.omega(0, 0) == doctest::Approx(0.3));
}

TEST_CASE("ELBO terms against a hand expansion at p = 4") {
    Matrix Kraw(4, 4);
    Kraw << 1.0, 0.2, 0.0, -0.1, 0.2, 1.3, 0.05, 0.0, 0.0, 0.05, 0.9, 0.3, -0.1, 0.0, 0.3, 1.1;
    const PrecisionEstimate K(Kraw);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix X(15, 4);
    for (int r = 0; r < 15; ++r) {
        for (int c = 0; c < 4; ++c) X(r, c) = z(rng);
    }
    const ObservationMatrix data(X);
    const Matrix tau = random_tau(4, 2, 13);
    PairTensor rho(4, 2);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            for (int q = 0; q < 2; ++q) {
                for (int l = 0; l < 2; ++l) rho.at(i, j, q, l) = u(rng);
            }
        }
    }
    BlockModelParameters theta = BlockModelParameters::uniform(2);
    theta.pi << 0.35, 0.65;
    theta.omega << 0.4, 0.1, 0.1, 0.25;
    const double xi0 = 6.0, s1 = 0.7;
    const ElboTerms t = elbo(data, K, tau, rho, theta, Hyperparameters{xi0, s1, 2, 0.1});

    double pl = 0.0;
    for (int i = 0; i < 4; ++i) {
        // Regression of X_i on the rest with coefficients -K_ji / K_ii and noise variance 1 / K_ii.
        Vector resid = X.col(i);
        for (int j = 0; j < 4; ++j) {
            if (j != i) resid += Kraw(j, i) / Kraw(i, i) * X.col(j);
        }
        for (int r = 0; r < 15; ++r) {
            pl += std::log(std::sqrt(Kraw(i, i) / (2 * M_PI)) * std::exp(-0.5 * Kraw(i, i) * resid[r] * resid[r]));
        }
    }
    CHECK(t.pseudo_loglik == doctest::Approx(pl).epsilon(1e-11));
    double dp = 0.0;
    for (int i = 0; i < 4; ++i) dp += std::log(s1 * std::exp(-s1 * Kraw(i, i)));
    CHECK(t.diag_prior == doctest::Approx(dp).epsilon(1e-12));

    double zt = 0, at = 0, kt = 0, ht = 0, hr = 0;
    for (int i = 0; i < 4; ++i) {
        for (int q = 0; q < 2; ++q) {
            zt += tau(i, q) * std::log(theta.pi[q]);
            ht += h(tau(i, q));
        }
    }
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (i == j) continue;
            const double k = Kraw(i, j);
            const double phi = std::exp(-0.5 * k * k / (s1 * s1)) / (s1 * std::sqrt(2 * M_PI));
            const double g = 0.5 * xi0 * std::exp(-xi0 * std::abs(k));
            for (int q = 0; q < 2; ++q) {
                for (int l = 0; l < 2; ++l) {
                    // Ordered pairs visit every unordered pair twice.
                    const double w = 0.5 * tau(i, q) * tau(j, l);
                    const double r = rho.at(i, j, q, l);
                    at += w * (r * std::log(theta.omega(q, l)) + (1 - r) * std::log(1 - theta.omega(q, l)));
                    kt += w * (r * std::log(phi) + (1 - r) * std::log(g));
                    hr += w * (h(r) + h(1 - r));
                }
            }
        }
    }
    CHECK(t.z_term == doctest::Approx(zt).epsilon(1e-12));
    CHECK(t.a_term == doctest::Approx(at).epsilon(1e-12));
    CHECK(t.k_term == doctest::Approx(kt).epsilon(1e-12));
    CHECK(t.entropy_tau == doctest::Approx(ht).epsilon(1e-12));
    CHECK(t.entropy_rho == doctest::Approx(hr).epsilon(1e-12));
    CHECK(t.total() == doctest::Approx(pl + dp + zt + at + kt + ht + hr).epsilon(1e-12));
}

TEST_CASE("entropy terms at the extremes") {
    const PrecisionEstimate K(Matrix::Identity(5, 5));
    const ObservationMatrix data(Matrix::Identity(5, 5) * 2.0);
    const Hyperparameters hyper{3.0, 1.0, 2, 0.1};
    const BlockModelParameters theta = BlockModelParameters::uniform(2);
    const ElboTerms uniform = elbo(data, K, Matrix::Constant(5, 2, 0.5), PairTensor(5, 2, 0.5), theta, hyper);
    CHECK(uniform.entropy_tau == doctest::Approx(5 * std::log(2.0)));
    CHECK(uniform.entropy_rho == doctest::Approx(10 * std::log(2.0)));
    const ElboTerms hard = elbo(data, K, one_hot({0, 1, 0, 1, 1}, 2), PairTensor(5, 2, 1.0), theta, hyper);
    CHECK(hard.entropy_tau == 0.0);
    CHECK(hard.entropy_rho == 0.0);
}

TEST_CASE("ELBO is invariant to relabelling the blocks") {
    const PrecisionEstimate K = small_precision();
    const ObservationMatrix data = band_data(6, 20, 5);
    const Hyperparameters hyper{8.0, 0.5, 3, 0.1};
    BlockModelParameters theta = BlockModelParameters::uniform(3);
    theta.pi << 0.2, 0.5, 0.3;
    theta.omega << 0.5, 0.01, 0.02, 0.01, 0.4, 0.03, 0.02, 0.03, 0.2;
    const Matrix tau = random_tau(6, 3, 6);
    const PairTensor rho = e_step_rho(K, theta, hyper);
    const int perm[3] = {2, 0, 1};
    BlockModelParameters pt = theta;
    Matrix ptau(6, 3);
    PairTensor prho(6, 3);
    for (int q = 0; q < 3; ++q) {
        pt.pi[perm[q]] = theta.pi[q];
        ptau.col(perm[q]) = tau.col(q);
        for (int l = 0; l < 3; ++l) {
            pt.omega(perm[q], perm[l]) = theta.omega(q, l);
            for (int i = 0; i < 6; ++i) {
                for (int j = i + 1; j < 6; ++j) prho.at(i, j, perm[q], perm[l]) = rho.at(i, j, q, l);
            }
        }
    }
    CHECK(elbo(data, K, tau, rho, theta, hyper).total() ==
          doctest::Approx(elbo(data, K, ptau, prho, pt, hyper).total()).epsilon(1e-13));
}

TEST_CASE("fit selects the single edge of the two-node model") {
    Matrix K0(2, 2);
    K0 << 0.5, 0.3, 0.3, 0.5;
    const ObservationMatrix data = sample_gaussian(K0, 10000, 21);
    const Hyperparameters hyper{2.0 * std::sqrt(10000 * std::log(2.0)), 0.5, 1, 0.1};
    const FitResult f = fit(data, hyper);
    CHECK(f.converged);
    CHECK(f.precision(0, 1) == doctest::Approx(0.3).epsilon(0.1));
    CHECK(decide(f, hyper, 0.1).adjacency(0, 1) == 1);

    const ObservationMatrix null_data = sample_gaussian(Matrix::Identity(2, 2), 10000, 22);
    const FitResult g = fit(null_data, hyper);
    CHECK(decide(g, hyper, 0.1).adjacency(0, 1) == 0);
}

TEST_CASE("fit is deterministic and thread-count independent") {
    const ObservationMatrix data = band_data(20, 60, 7);
    const Hyperparameters hyper{2.0 * std::sqrt(60 * std::log(20.0)), 0.5, 2, 0.1};
    VemConfig a;
    a.seed = 5;
    VemConfig b = a;
    b.threads = 3;
    const FitResult f1 = fit(data, hyper, a);
    const FitResult f2 = fit(data, hyper, a);
    const FitResult f3 = fit(data, hyper, b);
    CHECK(f1.precision.matrix() == f2.precision.matrix());
    CHECK(f1.state.tau == f2.state.tau);
    CHECK(f1.elbo_trace == f2.elbo_trace);
    CHECK(f1.precision.matrix() == f3.precision.matrix());
    CHECK(f1.state.tau == f3.state.tau);
}

TEST_CASE("no VEM step lowers the ELBO") {
    for (int Q : {1, 2, 3}) {
        const ObservationMatrix data = band_data(25, 80, 30 + static_cast<std::uint64_t>(Q));
        const Hyperparameters hyper{std::sqrt(80 * std::log(25.0)), 0.5, Q, 0.1};
        const FitResult f = fit(data, hyper);
        CHECK(f.diagnostics.vem_steps > 0);
        CHECK(f.diagnostics.min_vem_step_delta >= -1e-8);
        CHECK(f.diagnostics.max_kkt_residual <= 1e-6);
    }
}

TEST_CASE("known labels pin tau") {
    const ObservationMatrix data = band_data(12, 50, 8);
    const Hyperparameters hyper{std::sqrt(50 * std::log(12.0)), 0.5, 2, 0.1};
    VemConfig cfg;
    std::vector<int> labels{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
    cfg.fixed_labels = labels;
    const FitResult f = fit(data, hyper, cfg);
    CHECK(f.state.tau == one_hot(labels, 2));
    cfg.fixed_labels = std::vector<int>{0, 1};
    CHECK_THROWS_AS(fit(data, hyper, cfg), DomainError);
}

TEST_CASE("configuration validation") {
    VemConfig cfg;
    cfg.tau_damping = 1.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = VemConfig{};
    cfg.initial_edge_prob = 1.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = VemConfig{};
    cfg.max_outer_iter = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("spectral start separates two disconnected cliques") {
    Matrix W = Matrix::Zero(8, 8);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) {
            if (i != j && (i < 4) == (j < 4)) W(i, j) = 0.5;
        }
    }
    const auto z = map_clusters(spectral_tau(W, 2, 1));
    for (int i = 1; i < 4; ++i) CHECK(z[i] == z[0]);
    for (int i = 5; i < 8; ++i) CHECK(z[i] == z[4]);
    CHECK(z[0] != z[4]);
    CHECK(spectral_tau(Matrix::Zero(8, 8), 2, 1).rows() == 8);
}
