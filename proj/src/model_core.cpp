#include "ssg/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ssg {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << name << " must be a finite positive number, got " << v;
        throw DomainError(os.str());
    }
}

void require_open_unit(double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) {
        std::ostringstream os;
        os << name << " must lie strictly inside (0, 1), got " << v;
        throw DomainError(os.str());
    }
}

/// log-odds of edge presence: log(omega phi) - log((1 - omega) g).
double edge_log_odds(double k, double omega, double xi0, double sigma1) {
    require_open_unit(omega, "omega");
    return std::log(omega) + log_gaussian_density(k, sigma1) - std::log1p(-omega) -
           log_laplace_density(k, xi0);
}

double logistic(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace

double clamp_prob(double x) noexcept { return std::clamp(x, kProbClamp, 1.0 - kProbClamp); }

ObservationMatrix::ObservationMatrix(Matrix data, std::vector<std::string> names)
    : data_(std::move(data)), names_(std::move(names)) {
    if (data_.rows() < 2 || data_.cols() < 2) {
        throw DomainError("observation matrix needs n >= 2 and p >= 2");
    }
    if (!data_.allFinite()) {
        throw DomainError("observation matrix contains non-finite entries");
    }
    if (names_.empty()) {
        names_.reserve(static_cast<std::size_t>(data_.cols()));
        for (Eigen::Index j = 0; j < data_.cols(); ++j) {
            names_.push_back("V" + std::to_string(j + 1));
        }
    } else if (static_cast<Eigen::Index>(names_.size()) != data_.cols()) {
        throw DomainError("column name count does not match p");
    }
}

Matrix ObservationMatrix::sample_covariance() const {
    Matrix S = Matrix::Zero(p(), p());
    S.selfadjointView<Eigen::Lower>().rankUpdate(data_.transpose());
    S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
    return S / static_cast<double>(n());
}

void Hyperparameters::validate() const {
    require_positive(xi0, "xi0");
    require_positive(sigma1, "sigma1");
    if (Q < 1) {
        throw DomainError("block count Q must be >= 1");
    }
    require_open_unit(alpha, "alpha");
}

void BlockModelParameters::validate() const {
    const auto q = pi.size();
    if (q < 1 || omega.rows() != q || omega.cols() != q) {
        throw DomainError("block model parameters have inconsistent dimensions");
    }
    if (std::abs(pi.sum() - 1.0) > 1e-12) {
        throw DomainError("pi does not sum to one");
    }
    if (q > 1 && pi.minCoeff() < kProbClamp * (1.0 - 1e-12)) {
        throw DomainError("pi entry below the clamp floor");
    }
    if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("omega is not symmetric");
    }
    if (omega.minCoeff() < kProbClamp * (1.0 - 1e-12) ||
        omega.maxCoeff() > 1.0 - kProbClamp * (1.0 - 1e-12)) {
        throw DomainError("omega entry outside the clamp range");
    }
}

BlockModelParameters BlockModelParameters::uniform(int Q, double omega_value) {
    BlockModelParameters theta;
    theta.pi = Vector::Constant(Q, 1.0 / Q);
    theta.omega = Matrix::Constant(Q, Q, clamp_prob(omega_value));
    return theta;
}

PrecisionEstimate::PrecisionEstimate(Matrix K) : K_(std::move(K)) {
    if (K_.rows() != K_.cols() || K_.rows() < 2) {
        throw DomainError("precision estimate must be square with p >= 2");
    }
    if (!K_.allFinite()) {
        throw NumericError("precision estimate has non-finite entries");
    }
    if (K_ != K_.transpose()) {
        throw DomainError("precision estimate is not symmetric");
    }
    if (!(K_.diagonal().array() > 0.0).all()) {
        throw DomainError("precision estimate has a non-positive diagonal entry");
    }
}

Adjacency PrecisionEstimate::support() const {
    Adjacency A = (K_.array() != 0.0).cast<int>();
    A.diagonal().setZero();
    return A;
}

PairTensor::PairTensor(Eigen::Index p, int Q, double fill)
    : p_(p), Q_(Q), values_(pair_count(p) * static_cast<std::size_t>(Q * Q), fill) {}

double& PairTensor::at(Eigen::Index i, Eigen::Index j, int q, int l) {
    if (i > j) {
        std::swap(i, j);
        std::swap(q, l);
    }
    return block(pair_index(i, j, p_))[q * Q_ + l];
}

double PairTensor::at(Eigen::Index i, Eigen::Index j, int q, int l) const {
    if (i > j) {
        std::swap(i, j);
        std::swap(q, l);
    }
    return block(pair_index(i, j, p_))[q * Q_ + l];
}

Matrix PairTensor::pair_matrix(Eigen::Index i, Eigen::Index j) const {
    const bool flip = i > j;
    const double* b = flip ? block(pair_index(j, i, p_)) : block(pair_index(i, j, p_));
    Matrix m(Q_, Q_);
    for (int q = 0; q < Q_; ++q) {
        for (int l = 0; l < Q_; ++l) {
            m(q, l) = flip ? b[l * Q_ + q] : b[q * Q_ + l];
        }
    }
    return m;
}

void VariationalState::validate() const {
    if (tau.rows() != rho.p() || tau.cols() != rho.Q()) {
        throw DomainError("variational state dimensions disagree");
    }
    if ((tau.array() < 0.0).any()) {
        throw DomainError("tau has a negative entry");
    }
    if (((tau.rowwise().sum().array() - 1.0).abs() > 1e-10).any()) {
        throw DomainError("tau row does not sum to one");
    }
    for (double r : rho.values()) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw DomainError("rho entry outside [0, 1]");
        }
    }
}

double log_laplace_density(double x, double xi0) {
    require_positive(xi0, "xi0");
    return std::log(xi0 / 2.0) - xi0 * std::abs(x);
}

double log_gaussian_density(double x, double sigma1) {
    require_positive(sigma1, "sigma1");
    const double z = x / sigma1;
    return -kLogSqrt2Pi - std::log(sigma1) - 0.5 * z * z;
}

double laplace_density(double x, double xi0) { return std::exp(log_laplace_density(x, xi0)); }

double gaussian_density(double x, double sigma1) { return std::exp(log_gaussian_density(x, sigma1)); }

double posterior_edge_prob(double k_ij, double omega_ql, double xi0, double sigma1) {
    return logistic(edge_log_odds(k_ij, omega_ql, xi0, sigma1));
}

double posterior_null_prob(double k_ij, double omega_ql, double xi0, double sigma1) {
    return logistic(-edge_log_odds(k_ij, omega_ql, xi0, sigma1));
}

double log_mixture_density(double k_ij, double omega_ql, double xi0, double sigma1) {
    require_open_unit(omega_ql, "omega");
    const double a = std::log(omega_ql) + log_gaussian_density(k_ij, sigma1);
    const double b = std::log1p(-omega_ql) + log_laplace_density(k_ij, xi0);
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double pair_edge_prob(const Vector& tau_i, const Vector& tau_j, const Matrix& rho_ij) {
    if (tau_i.size() != rho_ij.rows() || tau_j.size() != rho_ij.cols()) {
        throw DomainError("pair_edge_prob: dimension mismatch");
    }
    return tau_i.dot(rho_ij * tau_j);
}

}  // namespace ssg
