#include "cellcal/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace cellcal {

std::optional<double> series_mape_pct(const std::vector<double>& sim,
                                      const std::vector<double>& obs) {
    if (sim.size() != obs.size()) {
        throw std::invalid_argument("series length mismatch");
    }
    if (obs.empty()) throw std::invalid_argument("empty series");
    double max_abs = 0.0;
    for (double v : obs) max_abs = std::max(max_abs, std::abs(v));
    const double floor = 1e-3 * max_abs;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (std::abs(obs[i]) > floor) {
            sum += std::abs(sim[i] - obs[i]) / std::abs(obs[i]);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return 100.0 * sum / static_cast<double>(n);
}

double series_rmse(const std::vector<double>& sim, const std::vector<double>& obs) {
    if (sim.size() != obs.size()) {
        throw std::invalid_argument("series length mismatch");
    }
    if (obs.empty()) throw std::invalid_argument("empty series");
    double sum = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double d = sim[i] - obs[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(obs.size()));
}

}  // namespace cellcal
