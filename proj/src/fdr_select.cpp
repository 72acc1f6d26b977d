#include "ssg/fdr_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace ssg {

std::vector<int> map_clusters(const Matrix& tau) {
    std::vector<int> z(static_cast<std::size_t>(tau.rows()), 0);
    for (Eigen::Index i = 0; i < tau.rows(); ++i) {
        int arg = 0;
        for (int q = 1; q < tau.cols(); ++q) {
            if (tau(i, q) > tau(i, arg)) arg = q;
        }
        z[static_cast<std::size_t>(i)] = arg;
    }
    return z;
}

std::vector<double> l_values(const PrecisionEstimate& K, const std::vector<int>& z_hat,
                             const BlockModelParameters& params, const Hyperparameters& hyper) {
    const Eigen::Index p = K.p();
    if (static_cast<Eigen::Index>(z_hat.size()) != p) {
        throw DomainError("l_values: label vector has the wrong length");
    }
    std::vector<double> out(pair_count(p));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double w = params.omega(z_hat[static_cast<std::size_t>(i)], z_hat[static_cast<std::size_t>(j)]);
            out[pair_index(i, j, p)] = posterior_null_prob(K(i, j), w, hyper.xi0, hyper.sigma1);
        }
    }
    return out;
}

std::vector<double> q_values(const std::vector<double>& l) {
    for (double v : l) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("q_values: l-value outside [0, 1]");
        }
    }
    std::vector<std::size_t> order(l.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return l[a] < l[b]; });

    std::vector<double> q(l.size());
    double running = 0.0;
    std::size_t k = 0;
    while (k < order.size()) {
        // Tied l-values share the mean over the inclusive set.
        std::size_t end = k;
        while (end < order.size() && l[order[end]] == l[order[k]]) {
            running += l[order[end]];
            ++end;
        }
        const double mean = running / static_cast<double>(end);
        for (std::size_t m = k; m < end; ++m) {
            q[order[m]] = mean;
        }
        k = end;
    }
    return q;
}

Adjacency select_graph(const std::vector<double>& q, Eigen::Index p, double alpha) {
    if (q.size() != pair_count(p)) {
        throw DomainError("select_graph: q-value count does not match p");
    }
    Adjacency A = Adjacency::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            if (q[pair_index(i, j, p)] <= alpha) {
                A(i, j) = A(j, i) = 1;
            }
        }
    }
    return A;
}

GraphDecision decide(const FitResult& fit, const Hyperparameters& hyper, double alpha) {
    GraphDecision d;
    d.alpha = alpha;
    d.z_hat = map_clusters(fit.state.tau);
    d.l_values = l_values(fit.precision, d.z_hat, fit.params, hyper);
    d.q_values = q_values(d.l_values);
    d.adjacency = select_graph(d.q_values, fit.precision.p(), alpha);
    return d;
}

int edge_count(const Adjacency& A) {
    int count = 0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < A.cols(); ++j) {
            count += A(i, j) != 0 ? 1 : 0;
        }
    }
    return count;
}

DiscoveryRates fdp_tdp(const Adjacency& estimated, const Adjacency& truth) {
    if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols()) {
        throw DomainError("fdp_tdp: dimension mismatch");
    }
    int selected = 0, false_sel = 0, true_sel = 0, true_edges = 0;
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < truth.cols(); ++j) {
            const bool e = estimated(i, j) != 0;
            const bool t = truth(i, j) != 0;
            selected += e;
            true_edges += t;
            false_sel += e && !t;
            true_sel += e && t;
        }
    }
    DiscoveryRates r;
    r.fdp = static_cast<double>(false_sel) / std::max(selected, 1);
    r.tdp = true_edges > 0 ? static_cast<double>(true_sel) / true_edges
                           : std::numeric_limits<double>::quiet_NaN();
    return r;
}

AbsInterval l_value_region(double t, double omega, double xi0, double sigma1) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (t >= 1.0) {
        return {0.0, inf};
    }
    if (!(t > 0.0)) {
        return {1.0, 0.0};
    }
    // l(x) <= t  <=>  -x^2 / (2 s^2) + xi0 x + C >= 0, x = |k|.
    const double s2 = sigma1 * sigma1;
    const double C = std::log(omega) - std::log1p(-omega) + log_gaussian_density(0.0, sigma1) -
                     log_laplace_density(0.0, xi0) - (std::log1p(-t) - std::log(t));
    const double centre = s2 * xi0;
    const double disc = centre * centre + 2.0 * s2 * C;
    if (disc < 0.0) {
        return {1.0, 0.0};
    }
    const double half = std::sqrt(disc);
    const double hi = centre + half;
    if (hi < 0.0) {
        return {1.0, 0.0};
    }
    return {std::max(0.0, centre - half), hi};
}

double oracle_mfdr(double t, const std::vector<int>& z_hat, const BlockModelParameters& params,
                   const Hyperparameters& hyper) {
    const int Q = params.Q();
    Matrix pairs = Matrix::Zero(Q, Q);  // unordered block-pair counts, upper triangle
    for (std::size_t i = 0; i < z_hat.size(); ++i) {
        for (std::size_t j = i + 1; j < z_hat.size(); ++j) {
            const int a = std::min(z_hat[i], z_hat[j]);
            const int b = std::max(z_hat[i], z_hat[j]);
            if (a < 0 || b >= Q) throw DomainError("oracle_mfdr: label outside [0, Q)");
            pairs(a, b) += 1.0;
        }
    }
    const double root2 = std::sqrt(2.0);
    double false_sel = 0.0, all_sel = 0.0;
    for (int a = 0; a < Q; ++a) {
        for (int b = a; b < Q; ++b) {
            if (pairs(a, b) == 0.0) continue;
            const double w = params.omega(a, b);
            const AbsInterval r = l_value_region(t, w, hyper.xi0, hyper.sigma1);
            if (!(r.lo <= r.hi)) continue;
            // |K| ~ Exp(xi0) under the spike, |K| ~ half-normal(sigma1) under the slab.
            const double p_spike = std::exp(-hyper.xi0 * r.lo) - std::exp(-hyper.xi0 * r.hi);
            const double p_slab = std::erfc(r.lo / (hyper.sigma1 * root2)) -
                                  std::erfc(r.hi / (hyper.sigma1 * root2));
            false_sel += pairs(a, b) * (1.0 - w) * p_spike;
            all_sel += pairs(a, b) * ((1.0 - w) * p_spike + w * p_slab);
        }
    }
    if (!std::isfinite(false_sel) || !std::isfinite(all_sel)) {
        std::ostringstream os;
        os << "oracle_mfdr: non-finite selection mass at t=" << t;
        throw NumericError(os.str());
    }
    return all_sel > 0.0 ? false_sel / all_sel : 0.0;
}

}  // namespace ssg
