#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssg/fdr_select.hpp"
#include "ssg/model_core.hpp"

namespace ssg {

/// Reals are written with 17 significant digits so they round-trip exactly.
std::string format_real(double x);

/// Rectangular numeric CSV with one header row of column names. Missing
/// values ("", NA, NaN, ...) and ragged rows raise ParseError with the
/// offending row/column.
ObservationMatrix ingest_csv(const std::filesystem::path& path);

/// Header + rows, same layout ingest_csv reads.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& values,
                      const std::vector<std::string>& names);
void write_adjacency_csv(const std::filesystem::path& path, const Adjacency& A,
                         const std::vector<std::string>& names);
Adjacency read_adjacency_csv(const std::filesystem::path& path);

/// One integer label per row under a single header; stored 0-based.
std::vector<int> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);

/// All pairs i < j with columns i, j, k_ij, l_value, q_value, selected
/// (1-based node indices).
void write_edge_list(const std::filesystem::path& path, const PrecisionEstimate& K,
                     const GraphDecision& decision);

/// Undirected DOT graph of the selected edges, labelled by column names, with
/// a q_value attribute per edge.
void write_dot(const std::filesystem::path& path, const GraphDecision& decision,
               const std::vector<std::string>& names);

}  // namespace ssg
