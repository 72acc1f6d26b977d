#pragma once

#include "ssg/model_core.hpp"

namespace ssg {

/// Columnwise (x - mean) / sd with the unbiased standard deviation.
ObservationMatrix standardize(const ObservationMatrix& data);

/// Winsorized rank Gaussianization per column: F(x) = clamp(rank / (n + 1),
/// delta_n, 1 - delta_n), delta_n = 1 / (4 n^{1/4} sqrt(pi log n)), then the
/// standard normal quantile. Ties share their mean rank.
ObservationMatrix nonparanormal(const ObservationMatrix& data);

/// The Winsorization level delta_n.
double nonparanormal_delta(Eigen::Index n);

}  // namespace ssg
