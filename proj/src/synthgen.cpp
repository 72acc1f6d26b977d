#include "ssg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ssg {

std::string to_string(TopologyKind kind) {
    switch (kind) {
        case TopologyKind::hub: return "hub";
        case TopologyKind::sbm: return "sbm";
        case TopologyKind::scale_free: return "scale_free";
        case TopologyKind::band: return "band";
    }
    return "unknown";
}

TopologyKind topology_from_string(const std::string& name) {
    if (name == "hub") return TopologyKind::hub;
    if (name == "sbm") return TopologyKind::sbm;
    if (name == "scale_free" || name == "scale-free") return TopologyKind::scale_free;
    if (name == "band") return TopologyKind::band;
    throw SpecError("unknown topology '" + name + "'");
}

void TopologySpec::validate() const {
    if (p < 4) {
        throw SpecError("topology needs p >= 4");
    }
    switch (kind) {
        case TopologyKind::hub:
            if (n_hubs < 1 || n_hubs >= p) throw SpecError("hub count must lie in [1, p)");
            break;
        case TopologyKind::sbm:
            if (q_true < 1 || q_true > p) throw SpecError("sbm block count must lie in [1, p]");
            if (!(within_prob > 0.0 && within_prob < 1.0) ||
                !(between_prob > 0.0 && between_prob < 1.0)) {
                throw SpecError("sbm probabilities must lie in (0, 1)");
            }
            break;
        case TopologyKind::scale_free:
            if (attachment_count < 1 || attachment_count >= p) {
                throw SpecError("attachment count must lie in [1, p)");
            }
            break;
        case TopologyKind::band:
            if (bandwidth < 1 || bandwidth >= p) throw SpecError("bandwidth must lie in [1, p)");
            break;
    }
}

std::vector<int> sbm_labels(const TopologySpec& spec) {
    std::vector<int> labels(static_cast<std::size_t>(spec.p));
    for (int i = 0; i < spec.p; ++i) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(
            static_cast<long long>(i) * spec.q_true / spec.p);
    }
    return labels;
}

namespace {

void add_edge(Adjacency& A, int i, int j) {
    A(i, j) = 1;
    A(j, i) = 1;
}

Adjacency hub_graph(const TopologySpec& spec, std::mt19937_64& rng) {
    // Hubs are nodes 0..n_hubs-1; every other node links to one uniformly chosen hub.
    Adjacency A = Adjacency::Zero(spec.p, spec.p);
    std::uniform_int_distribution<int> pick(0, spec.n_hubs - 1);
    for (int i = spec.n_hubs; i < spec.p; ++i) {
        add_edge(A, i, pick(rng));
    }
    return A;
}

Adjacency sbm_graph(const TopologySpec& spec, std::mt19937_64& rng) {
    Adjacency A = Adjacency::Zero(spec.p, spec.p);
    const auto labels = sbm_labels(spec);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < spec.p; ++i) {
        for (int j = i + 1; j < spec.p; ++j) {
            const double prob = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                                    ? spec.within_prob
                                    : spec.between_prob;
            if (u(rng) < prob) {
                add_edge(A, i, j);
            }
        }
    }
    return A;
}

Adjacency scale_free_graph(const TopologySpec& spec, std::mt19937_64& rng) {
    // Preferential attachment: each new node links to `attachment_count` distinct
    // existing nodes drawn with probability proportional to degree.
    const int m = spec.attachment_count;
    Adjacency A = Adjacency::Zero(spec.p, spec.p);
    std::vector<int> endpoints;  // node repeated once per incident edge
    const int seed_nodes = m + 1;
    for (int i = 0; i < seed_nodes; ++i) {
        for (int j = i + 1; j < seed_nodes; ++j) {
            add_edge(A, i, j);
            endpoints.push_back(i);
            endpoints.push_back(j);
        }
    }
    for (int v = seed_nodes; v < spec.p; ++v) {
        std::vector<int> targets;
        while (static_cast<int>(targets.size()) < m) {
            std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
            const int t = endpoints[pick(rng)];
            if (std::find(targets.begin(), targets.end(), t) == targets.end()) {
                targets.push_back(t);
            }
        }
        for (int t : targets) {
            add_edge(A, v, t);
            endpoints.push_back(v);
            endpoints.push_back(t);
        }
    }
    return A;
}

Adjacency band_graph(const TopologySpec& spec) {
    Adjacency A = Adjacency::Zero(spec.p, spec.p);
    for (int i = 0; i < spec.p; ++i) {
        for (int j = i + 1; j <= std::min(spec.p - 1, i + spec.bandwidth); ++j) {
            add_edge(A, i, j);
        }
    }
    return A;
}

}  // namespace

Adjacency generate_topology(const TopologySpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    switch (spec.kind) {
        case TopologyKind::hub: return hub_graph(spec, rng);
        case TopologyKind::sbm: return sbm_graph(spec, rng);
        case TopologyKind::scale_free: return scale_free_graph(spec, rng);
        case TopologyKind::band: return band_graph(spec);
    }
    throw SpecError("unhandled topology");
}

Matrix precision_from_adjacency(const Adjacency& adjacency, double gamma, double beta) {
    if (adjacency.rows() != adjacency.cols()) {
        throw SpecError("adjacency must be square");
    }
    if (!(beta > 0.0)) {
        throw DomainError("beta must be positive");
    }
    const Matrix scaled = gamma * adjacency.cast<double>();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(scaled, Eigen::EigenvaluesOnly);
    const double shift = std::abs(eig.eigenvalues().minCoeff()) + beta;
    Matrix K = scaled;
    K.diagonal().array() += shift;
    return K;
}

GroundTruth generate_ground_truth(const TopologySpec& spec, double gamma, double beta,
                                  std::uint64_t seed) {
    GroundTruth truth;
    truth.adjacency = generate_topology(spec, seed);
    truth.precision = precision_from_adjacency(truth.adjacency, gamma, beta);
    if (spec.kind == TopologyKind::sbm) {
        truth.labels = sbm_labels(spec);
    }
    return truth;
}

ObservationMatrix sample_gaussian(const Matrix& precision, int n, std::uint64_t seed) {
    const Eigen::Index p = precision.rows();
    if (n < 2 || p < 2 || precision.cols() != p) {
        throw DomainError("sample_gaussian needs a square precision with p >= 2 and n >= 2");
    }
    Eigen::LLT<Matrix> kfac(precision);
    if (kfac.info() != Eigen::Success) {
        throw FactorizationError("precision matrix is not positive definite");
    }
    const Matrix I = Matrix::Identity(p, p);
    const Matrix sigma = kfac.solve(I);
    const double residual = (precision * sigma - I).norm() / std::sqrt(static_cast<double>(p));
    if (residual > 1e-10) {
        throw FactorizationError("covariance inversion residual above 1e-10");
    }
    const Matrix sym = 0.5 * (sigma + sigma.transpose());
    Eigen::LLT<Matrix> sfac(sym);
    if (sfac.info() != Eigen::Success) {
        throw FactorizationError("covariance matrix is not positive definite");
    }
    const Matrix L = sfac.matrixL();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix Z(p, n);
    for (int r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < p; ++c) {
            Z(c, r) = normal(rng);
        }
    }
    return ObservationMatrix((L * Z).transpose());
}

PriorDraw draw_from_prior(Eigen::Index p, const BlockModelParameters& theta, double xi0,
                          double sigma1, double min_eigenvalue, std::uint64_t seed) {
    theta.validate();
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> block(theta.pi.data(), theta.pi.data() + theta.pi.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> slab(0.0, sigma1);
    std::exponential_distribution<double> spike_abs(xi0);

    PriorDraw draw;
    draw.labels.resize(static_cast<std::size_t>(p));
    for (auto& z : draw.labels) {
        z = block(rng);
    }
    draw.adjacency = Adjacency::Zero(p, p);
    draw.precision = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const double w = theta.omega(draw.labels[static_cast<std::size_t>(i)],
                                         draw.labels[static_cast<std::size_t>(j)]);
            double k;
            if (u(rng) < w) {
                draw.adjacency(i, j) = draw.adjacency(j, i) = 1;
                k = slab(rng);
            } else {
                k = spike_abs(rng);
                if (u(rng) < 0.5) k = -k;
            }
            draw.precision(i, j) = draw.precision(j, i) = k;
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(draw.precision, Eigen::EigenvaluesOnly);
    draw.precision.diagonal().array() += min_eigenvalue - eig.eigenvalues().minCoeff();
    return draw;
}

}  // namespace ssg
