#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssg/errors.hpp"

namespace ssg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Adjacency = Eigen::MatrixXi;

/// Floor/ceiling applied to probabilities (pi, omega, edge weights) to keep
/// them strictly inside (0, 1).
inline constexpr double kProbClamp = 1e-6;

double clamp_prob(double x) noexcept;

/// n x p data matrix, rows are observations.
class ObservationMatrix {
public:
    ObservationMatrix() = default;
    explicit ObservationMatrix(Matrix data, std::vector<std::string> names = {});

    Eigen::Index n() const noexcept { return data_.rows(); }
    Eigen::Index p() const noexcept { return data_.cols(); }
    const Matrix& data() const noexcept { return data_; }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// S = X^T X / n (the model is centred).
    Matrix sample_covariance() const;

private:
    Matrix data_;
    std::vector<std::string> names_;
};

struct Hyperparameters {
    double xi0 = 1.0;     // spike (Laplace) rate
    double sigma1 = 1.0;  // slab (Gaussian) scale; also the rate of the diagonal prior
    int Q = 1;
    double alpha = 0.1;

    void validate() const;
};

/// theta = (pi, omega) of the block model.
struct BlockModelParameters {
    Vector pi;
    Matrix omega;

    int Q() const noexcept { return static_cast<int>(pi.size()); }
    void validate() const;
    static BlockModelParameters uniform(int Q, double omega_value = 0.5);
};

/// Symmetric p x p precision estimate with positive diagonal.
class PrecisionEstimate {
public:
    PrecisionEstimate() = default;
    explicit PrecisionEstimate(Matrix K);

    const Matrix& matrix() const noexcept { return K_; }
    Eigen::Index p() const noexcept { return K_.rows(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return K_(i, j); }

    /// A_ij = 1{K_ij != 0}, zero diagonal.
    Adjacency support() const;

private:
    Matrix K_;
};

/// Number of unordered pairs i < j.
inline std::size_t pair_count(Eigen::Index p) noexcept {
    const auto pp = static_cast<std::size_t>(p);
    return pp * (pp - 1) / 2;
}

/// Row-major index of pair (i, j), i < j.
inline std::size_t pair_index(Eigen::Index i, Eigen::Index j, Eigen::Index p) noexcept {
    const auto ii = static_cast<std::size_t>(i);
    const auto jj = static_cast<std::size_t>(j);
    const auto pp = static_cast<std::size_t>(p);
    return ii * pp - ii * (ii + 1) / 2 + (jj - ii - 1);
}

/// Per-pair Q x Q tensor (rho and friends). Only i < j is stored; (j, i, q, l)
/// resolves to (i, j, l, q).
class PairTensor {
public:
    PairTensor() = default;
    PairTensor(Eigen::Index p, int Q, double fill = 0.0);

    Eigen::Index p() const noexcept { return p_; }
    int Q() const noexcept { return Q_; }

    double& at(Eigen::Index i, Eigen::Index j, int q, int l);
    double at(Eigen::Index i, Eigen::Index j, int q, int l) const;

    /// Q x Q block of the unordered pair (i < j), row-major (q, l).
    double* block(std::size_t pair) noexcept { return values_.data() + pair * Q_ * Q_; }
    const double* block(std::size_t pair) const noexcept { return values_.data() + pair * Q_ * Q_; }

    /// Block for an ordered pair (either order); transposed when i > j.
    Matrix pair_matrix(Eigen::Index i, Eigen::Index j) const;

    const std::vector<double>& values() const noexcept { return values_; }

private:
    Eigen::Index p_ = 0;
    int Q_ = 0;
    std::vector<double> values_;
};

struct VariationalState {
    Matrix tau;      // p x Q, row-stochastic
    PairTensor rho;  // posterior edge probabilities per block pair

    void validate() const;
};

// Densities ------------------------------------------------------------------

double log_laplace_density(double x, double xi0);
double log_gaussian_density(double x, double sigma1);
double laplace_density(double x, double xi0);
double gaussian_density(double x, double sigma1);

/// rho = omega phi / (omega phi + (1 - omega) g), evaluated as a logistic of the
/// log-odds. omega must be strictly inside (0, 1).
double posterior_edge_prob(double k_ij, double omega_ql, double xi0, double sigma1);

/// 1 - posterior_edge_prob, evaluated from the same log-odds.
double posterior_null_prob(double k_ij, double omega_ql, double xi0, double sigma1);

/// log(omega phi(k) + (1 - omega) g(k)).
double log_mixture_density(double k_ij, double omega_ql, double xi0, double sigma1);

/// p_ij = tau_i^T rho_ij tau_j.
double pair_edge_prob(const Vector& tau_i, const Vector& tau_j, const Matrix& rho_ij);

}  // namespace ssg
