#include "ssg/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ssg {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

std::string trim(std::string s) {
    const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
    return s;
}

std::string location(const std::filesystem::path& path, std::size_t row, std::size_t col,
                     const std::string& name) {
    std::ostringstream os;
    os << path.string() << ": row " << row << ", column " << col;
    if (!name.empty()) os << " ('" << name << "')";
    return os.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot open " + path.string() + " for writing");
    }
    return out;
}

}  // namespace

std::string format_real(double x) {
    if (x == 0.0) x = 0.0;  // no "-0" in output
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ObservationMatrix ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path.string() + ": empty file");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> names;
    for (auto& c : split_line(line)) names.push_back(trim(c));
    const std::size_t p = names.size();

    std::vector<double> values;
    std::size_t row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != p) {
            std::ostringstream os;
            os << path.string() << ": row " << row << " has " << cells.size() << " cells, expected " << p;
            throw ParseError(os.str());
        }
        for (std::size_t c = 0; c < p; ++c) {
            const std::string cell = trim(cells[c]);
            double v = 0.0;
            const auto* first = cell.data();
            const auto* last = cell.data() + cell.size();
            const auto res = std::from_chars(first, last, v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
                throw ParseError(location(path, row, c + 1, names[c]) +
                                 (cell.empty() ? ": missing value" : ": non-numeric or missing value '" + cell + "'"));
            }
            values.push_back(v);
        }
    }
    const std::size_t n = p == 0 ? 0 : values.size() / p;
    if (n < 2 || p < 2) {
        throw ParseError(path.string() + ": need at least 2 rows and 2 columns of data");
    }
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < p; ++c) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * p + c];
        }
    }
    return ObservationMatrix(std::move(X), std::move(names));
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& values,
                      const std::vector<std::string>& names) {
    if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
        throw DomainError("write_matrix_csv: name count does not match column count");
    }
    auto out = open_out(path);
    for (std::size_t c = 0; c < names.size(); ++c) {
        out << (c ? "," : "") << names[c];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            out << (c ? "," : "") << format_real(values(r, c));
        }
        out << '\n';
    }
}

void write_adjacency_csv(const std::filesystem::path& path, const Adjacency& A,
                         const std::vector<std::string>& names) {
    write_matrix_csv(path, A.cast<double>(), names);
}

Adjacency read_adjacency_csv(const std::filesystem::path& path) {
    const ObservationMatrix m = ingest_csv(path);
    if (m.n() != m.p()) {
        throw ParseError(path.string() + ": adjacency must be square");
    }
    Adjacency A = m.data().cast<int>();
    if (A != A.transpose() || (A.array() < 0).any() || (A.array() > 1).any()) {
        throw ParseError(path.string() + ": adjacency must be a symmetric 0/1 matrix");
    }
    return A;
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path.string());
    }
    std::string line;
    std::getline(in, line);
    std::vector<int> labels;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const std::string cell = trim(line);
        if (cell.empty()) continue;
        int v = 0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || v < 1) {
            throw ParseError(location(path, row, 1, "") + ": labels must be positive integers");
        }
        labels.push_back(v - 1);
    }
    return labels;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels) {
    auto out = open_out(path);
    out << "label\n";
    for (int z : labels) out << z + 1 << '\n';
}

void write_edge_list(const std::filesystem::path& path, const PrecisionEstimate& K,
                     const GraphDecision& decision) {
    const Eigen::Index p = K.p();
    auto out = open_out(path);
    out << "i,j,k_ij,l_value,q_value,selected\n";
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            const std::size_t k = pair_index(i, j, p);
            out << i + 1 << ',' << j + 1 << ',' << format_real(K(i, j)) << ','
                << format_real(decision.l_values[k]) << ',' << format_real(decision.q_values[k]) << ','
                << decision.adjacency(i, j) << '\n';
        }
    }
}

void write_dot(const std::filesystem::path& path, const GraphDecision& decision,
               const std::vector<std::string>& names) {
    const Eigen::Index p = decision.adjacency.rows();
    auto out = open_out(path);
    out << "graph G {\n";
    for (Eigen::Index i = 0; i < p; ++i) {
        out << "  \"" << names[static_cast<std::size_t>(i)] << "\";\n";
    }
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) {
            if (decision.adjacency(i, j) == 0) continue;
            out << "  \"" << names[static_cast<std::size_t>(i)] << "\" -- \"" << names[static_cast<std::size_t>(j)]
                << "\" [q_value=" << format_real(decision.q_values[pair_index(i, j, p)]) << "];\n";
        }
    }
    out << "}\n";
}

}  // namespace ssg
