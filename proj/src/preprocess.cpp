#include "ssg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace ssg {

ObservationMatrix standardize(const ObservationMatrix& data) {
    const Matrix& X = data.data();
    const double n = static_cast<double>(data.n());
    Matrix Y(X.rows(), X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        const double mean = X.col(c).mean();
        const Vector centred = X.col(c).array() - mean;
        const double var = centred.squaredNorm() / (n - 1.0);
        if (!(var > 0.0)) {
            throw PreprocessError("column '" + data.names()[static_cast<std::size_t>(c)] +
                                  "' has zero variance");
        }
        Y.col(c) = centred / std::sqrt(var);
    }
    return ObservationMatrix(std::move(Y), data.names());
}

double nonparanormal_delta(Eigen::Index n) {
    const double nn = static_cast<double>(n);
    return 1.0 / (4.0 * std::pow(nn, 0.25) * std::sqrt(std::numbers::pi * std::log(nn)));
}

ObservationMatrix nonparanormal(const ObservationMatrix& data) {
    const Eigen::Index n = data.n();
    if (n < 3) {
        throw PreprocessError("nonparanormal transform needs n >= 3");
    }
    const double delta = nonparanormal_delta(n);
    const boost::math::normal_distribution<double> normal(0.0, 1.0);
    const Matrix& X = data.data();
    Matrix Y(X.rows(), X.cols());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return X(a, c) < X(b, c); });
        std::size_t k = 0;
        while (k < order.size()) {
            std::size_t end = k;
            while (end < order.size() && X(order[end], c) == X(order[k], c)) ++end;
            // ranks k+1 .. end share their mean
            const double rank = 0.5 * (static_cast<double>(k + 1) + static_cast<double>(end));
            const double u = std::clamp(rank / static_cast<double>(n + 1), delta, 1.0 - delta);
            const double z = boost::math::quantile(normal, u);
            for (std::size_t m = k; m < end; ++m) Y(order[m], c) = z;
            k = end;
        }
    }
    return ObservationMatrix(std::move(Y), data.names());
}

}  // namespace ssg
