#pragma once

#include <optional>
#include <vector>

namespace cellcal {

// Shared residual definitions used by both the feedback builder and the
// evaluation reports.

// Mean absolute percentage error over samples where |obs| exceeds 1e-3 times
// the channel's max |obs|; absent when every sample is masked.
std::optional<double> series_mape_pct(const std::vector<double>& sim,
                                      const std::vector<double>& obs);

// Root mean squared error over all samples.
double series_rmse(const std::vector<double>& sim, const std::vector<double>& obs);

}  // namespace cellcal
