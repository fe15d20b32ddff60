#pragma once

#include "gamenet/matrix.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>

namespace gamenet::eval {

struct MetricsReport {
    double r2 = 0.0;     ///< NaN when undefined
    double mae = 0.0;
    double mse = 0.0;
    double relmse = 0.0; ///< SSE / SST; NaN when undefined
    std::size_t n = 0;
    bool r2_defined = true; ///< false for constant y

    nlohmann::json to_json() const;
};

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat);

struct Summary {
    double mean = 0.0;
    double stdev = 0.0; ///< population
    double min = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double max = 0.0;

    nlohmann::json to_json() const;
};

/// Linear-interpolated quantiles.
Summary summarize(std::span<const double> v);
double skewness(std::span<const double> v);

struct ErrorAnalysis {
    double residual_mean = 0.0; ///< mean of yhat - y
    double residual_stdev = 0.0;
    double residual_skew = 0.0;
    Summary actual;
    Summary predicted;
    std::map<int, std::array<double, 3>> decade_gate_mean;
    std::map<int, std::size_t> decade_count;

    nlohmann::json to_json() const;
};

/// y and yhat on the 0-100 scale. `years` and `alpha` (n x 3) are optional;
/// when both are given, gate weights are averaged per decade.
ErrorAnalysis error_analysis(std::span<const double> y, std::span<const double> yhat,
                             std::span<const int> years = {}, const Matrix* alpha = nullptr);

} // namespace gamenet::eval
