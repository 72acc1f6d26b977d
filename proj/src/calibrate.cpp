#include "ssg/calibrate.hpp"

#include <cmath>
#include <limits>

#include "ssg/parallel.hpp"

namespace ssg {

namespace {
constexpr double kLog2Pi = 1.83787706640934548356;
}

void CalibrationGrid::validate() const {
    if (c_grid.empty() || sigma_grid.empty()) {
        throw DomainError("calibration grids must be non-empty");
    }
    if (!(sigma_lower > 0.0 && sigma_lower < sigma_upper)) {
        throw DomainError("calibration needs 0 < sigma_lower < sigma_upper");
    }
    for (double c : c_grid) {
        if (!(c > 0.0)) throw DomainError("c grid entries must be positive");
    }
    for (double s : sigma_grid) {
        if (!(s >= sigma_lower && s <= sigma_upper)) {
            throw DomainError("sigma grid entry outside [sigma_lower, sigma_upper]");
        }
    }
    if (q_min < 1 || q_max < q_min) {
        throw DomainError("calibration needs 1 <= q_min <= q_max");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("alpha must lie in (0, 1)");
    }
}

std::size_t CalibrationGrid::cell_count() const {
    return static_cast<std::size_t>(q_max - q_min + 1) * c_grid.size() * sigma_grid.size();
}

double spike_from_constant(double c, Eigen::Index n, Eigen::Index p) {
    if (!(c > 0.0) || n < 2 || p < 2) {
        throw DomainError("spike_from_constant needs c > 0, n >= 2, p >= 2");
    }
    return c * std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(p)));
}

double pseudo_loglik_graph(const ObservationMatrix& data, const Adjacency& adjacency) {
    const Matrix& X = data.data();
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    if (adjacency.rows() != p || adjacency.cols() != p) {
        throw DomainError("pseudo_loglik_graph: adjacency does not match the data");
    }
    const double nn = static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        std::vector<Eigen::Index> nb;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (j != i && adjacency(i, j) != 0) nb.push_back(j);
        }
        double rss;
        if (nb.empty()) {
            rss = X.col(i).squaredNorm();
        } else {
            Matrix D(n, static_cast<Eigen::Index>(nb.size()));
            for (std::size_t k = 0; k < nb.size(); ++k) {
                D.col(static_cast<Eigen::Index>(k)) = X.col(nb[k]);
            }
            // Minimum-norm least squares covers rank-deficient neighbourhoods.
            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(D);
            const Vector beta = cod.solve(X.col(i));
            rss = (X.col(i) - D * beta).squaredNorm();
        }
        const double sigma2 = std::max(rss / nn, std::numeric_limits<double>::min());
        total += -0.5 * nn * kLog2Pi - 0.5 * nn * std::log(sigma2) - 0.5 * nn;
    }
    return total;
}

double bic_hyper(double pseudo_loglik, int n_edges, Eigen::Index n) {
    return -2.0 * pseudo_loglik + std::log(static_cast<double>(n)) * n_edges;
}

double bic_hyper(const ObservationMatrix& data, const Adjacency& adjacency, Eigen::Index n) {
    return bic_hyper(pseudo_loglik_graph(data, adjacency), edge_count(adjacency), n);
}

double bic_q_penalty(int Q, Eigen::Index p) {
    if (Q < 1) throw DomainError("bic_q needs Q >= 1");
    const double pp = static_cast<double>(p);
    return (Q - 1) * std::log(pp) + 0.5 * Q * (Q + 1) * std::log(pp * (pp - 1.0) / 2.0);
}

double bic_q(double pseudo_loglik, int Q, Eigen::Index p) {
    return -2.0 * pseudo_loglik + bic_q_penalty(Q, p);
}

double bic_q(const ObservationMatrix& data, const Adjacency& adjacency, int Q, Eigen::Index p) {
    return bic_q(pseudo_loglik_graph(data, adjacency), Q, p);
}

CalibrationResult calibrate_all(const ObservationMatrix& data, const CalibrationGrid& grid,
                                const VemConfig& config) {
    grid.validate();
    const std::size_t n_c = grid.c_grid.size();
    const std::size_t n_s = grid.sigma_grid.size();
    const std::size_t cells = grid.cell_count();

    struct Cell {
        BicRow row;
        std::optional<FitResult> fit;
        GraphDecision decision;
    };
    std::vector<Cell> results(cells);

    VemConfig inner = config;
    inner.threads = 1;
    inner.on_iteration = nullptr;

    parallel_for(cells, config.threads, [&](std::size_t k) {
        const int Q = grid.q_min + static_cast<int>(k / (n_c * n_s));
        const double c = grid.c_grid[(k / n_s) % n_c];
        const double sigma1 = grid.sigma_grid[k % n_s];
        Cell& cell = results[k];
        cell.row.Q = Q;
        cell.row.c = c;
        cell.row.sigma1 = sigma1;
        cell.row.xi0 = spike_from_constant(c, data.n(), data.p());
        try {
            Hyperparameters hyper{cell.row.xi0, sigma1, Q, grid.alpha};
            VemConfig cfg = inner;
            cfg.seed = config.seed + k;
            FitResult fr = fit(data, hyper, cfg);
            cell.decision = decide(fr, hyper, grid.alpha);
            cell.row.n_edges = edge_count(cell.decision.adjacency);
            cell.row.pseudo_loglik = pseudo_loglik_graph(data, cell.decision.adjacency);
            cell.row.bic_hyper = bic_hyper(cell.row.pseudo_loglik, cell.row.n_edges, data.n());
            cell.row.bic_q = bic_q(cell.row.pseudo_loglik, Q, data.p());
            cell.row.max_kkt_residual = fr.diagnostics.max_kkt_residual;
            cell.row.min_vem_step_delta = fr.diagnostics.min_vem_step_delta;
            cell.fit = std::move(fr);
        } catch (const Error&) {
            cell.row.failed = true;
            cell.row.pseudo_loglik = cell.row.bic_hyper = cell.row.bic_q =
                std::numeric_limits<double>::quiet_NaN();
        }
    });

    CalibrationResult out;
    out.bic_table.reserve(cells);
    for (const auto& cell : results) out.bic_table.push_back(cell.row);

    std::optional<std::size_t> chosen;
    for (int Q = grid.q_min; Q <= grid.q_max; ++Q) {
        std::optional<std::size_t> best_for_q;
        const std::size_t base = static_cast<std::size_t>(Q - grid.q_min) * n_c * n_s;
        for (std::size_t k = base; k < base + n_c * n_s; ++k) {
            if (results[k].row.failed) continue;
            if (!best_for_q || results[k].row.bic_hyper < results[*best_for_q].row.bic_hyper) {
                best_for_q = k;
            }
        }
        if (!best_for_q) continue;
        if (!chosen || results[*best_for_q].row.bic_q < results[*chosen].row.bic_q) {
            chosen = best_for_q;
        }
    }
    if (!chosen) {
        throw CalibrationError("every calibration cell failed");
    }
    Cell& win = results[*chosen];
    out.best_Q = win.row.Q;
    out.best_c = win.row.c;
    out.best_xi0 = win.row.xi0;
    out.best_sigma1 = win.row.sigma1;
    out.best_fit = std::move(*win.fit);
    out.best_decision = std::move(win.decision);
    return out;
}

}  // namespace ssg
