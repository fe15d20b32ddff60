#pragma once

#include "gamenet/matrix.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace gamenet::data {

enum class ScalerKind { ZScore, MinMax, Constant };
std::string to_string(ScalerKind k);
ScalerKind parse_scaler_kind(const std::string& s);

/// Per-column statistics. zscore stores mean / population stdev, minmax
/// stores min / max; constant multiplies by `factor`. Degenerate columns
/// (zero spread) map to 0.
struct ScalerParams {
    ScalerKind kind = ScalerKind::ZScore;
    double factor = 1.0;
    std::vector<double> a; ///< mean or min
    std::vector<double> b; ///< stdev or max
    bool fitted = false;

    static ScalerParams fit(const Matrix& train, ScalerKind kind, double factor = 100.0);
    /// MinMax with a known range instead of fitted bounds.
    static ScalerParams fixed_range(std::size_t cols, double lo, double hi);

    Matrix apply(const Matrix& x) const;
    Matrix inverse(const Matrix& x) const;

    nlohmann::json to_json() const;
    static ScalerParams from_json(const nlohmann::json& j);
};

} // namespace gamenet::data
