#include "gamenet/scaler.hpp"

#include "gamenet/error.hpp"

#include <algorithm>
#include <cmath>

namespace gamenet::data {

std::string to_string(ScalerKind k)
{
    switch (k) {
    case ScalerKind::ZScore: return "zscore";
    case ScalerKind::MinMax: return "minmax";
    case ScalerKind::Constant: return "constant";
    }
    return "unknown";
}

ScalerKind parse_scaler_kind(const std::string& s)
{
    if (s == "zscore")
        return ScalerKind::ZScore;
    if (s == "minmax")
        return ScalerKind::MinMax;
    if (s == "constant")
        return ScalerKind::Constant;
    throw ConfigError("unknown scaler kind '" + s + "'");
}

ScalerParams ScalerParams::fit(const Matrix& train, ScalerKind kind, double factor)
{
    ScalerParams p;
    p.kind = kind;
    p.fitted = true;
    const std::size_t n = train.rows();
    const std::size_t d = train.cols();
    if (kind == ScalerKind::Constant) {
        if (!std::isfinite(factor) || factor == 0.0)
            throw ConfigError("constant scaler factor must be finite and non-zero");
        p.factor = factor;
        p.a.assign(d, 0.0);
        p.b.assign(d, 0.0);
        return p;
    }
    if (n == 0)
        throw DataError("cannot fit a scaler on zero rows");
    require_finite(train, "scaler input");
    p.a.assign(d, 0.0);
    p.b.assign(d, 0.0);
    if (kind == ScalerKind::ZScore) {
        for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                mean += train(r, c);
            mean /= static_cast<double>(n);
            double ss = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double e = train(r, c) - mean;
                ss += e * e;
            }
            p.a[c] = mean;
            p.b[c] = std::sqrt(ss / static_cast<double>(n));
        }
    } else {
        for (std::size_t c = 0; c < d; ++c) {
            double lo = train(0, c);
            double hi = lo;
            for (std::size_t r = 1; r < n; ++r) {
                lo = std::min(lo, train(r, c));
                hi = std::max(hi, train(r, c));
            }
            p.a[c] = lo;
            p.b[c] = hi;
        }
    }
    return p;
}

ScalerParams ScalerParams::fixed_range(std::size_t cols, double lo, double hi)
{
    if (!(hi > lo))
        throw ConfigError("fixed range needs hi > lo");
    ScalerParams p;
    p.kind = ScalerKind::MinMax;
    p.a.assign(cols, lo);
    p.b.assign(cols, hi);
    p.fitted = true;
    return p;
}

Matrix ScalerParams::apply(const Matrix& x) const
{
    if (!fitted)
        throw StateError("scaler applied before fitting");
    if (x.cols() != a.size())
        throw ShapeError("scaler fitted on " + std::to_string(a.size()) + " columns, got " + std::to_string(x.cols()));
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double v = x(r, c);
            switch (kind) {
            case ScalerKind::ZScore: out(r, c) = b[c] > 0.0 ? (v - a[c]) / b[c] : 0.0; break;
            case ScalerKind::MinMax: out(r, c) = b[c] > a[c] ? (v - a[c]) / (b[c] - a[c]) : 0.0; break;
            case ScalerKind::Constant: out(r, c) = v * factor; break;
            }
        }
    return out;
}

Matrix ScalerParams::inverse(const Matrix& x) const
{
    if (!fitted)
        throw StateError("scaler inverted before fitting");
    if (x.cols() != a.size())
        throw ShapeError("scaler fitted on " + std::to_string(a.size()) + " columns, got " + std::to_string(x.cols()));
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double v = x(r, c);
            switch (kind) {
            case ScalerKind::ZScore: out(r, c) = v * b[c] + a[c]; break;
            case ScalerKind::MinMax: out(r, c) = v * (b[c] - a[c]) + a[c]; break;
            case ScalerKind::Constant: out(r, c) = v / factor; break;
            }
        }
    return out;
}

nlohmann::json ScalerParams::to_json() const
{
    if (!fitted)
        throw StateError("cannot serialize an unfitted scaler");
    return {{"kind", to_string(kind)}, {"factor", factor}, {"a", a}, {"b", b}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j)
{
    ScalerParams p;
    p.kind = parse_scaler_kind(j.at("kind").get<std::string>());
    p.factor = j.at("factor").get<double>();
    p.a = j.at("a").get<std::vector<double>>();
    p.b = j.at("b").get<std::vector<double>>();
    if (p.a.size() != p.b.size())
        throw DataError("scaler: statistic lengths differ");
    p.fitted = true;
    return p;
}

} // namespace gamenet::data
