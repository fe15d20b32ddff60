#include "gamenet/metrics.hpp"

#include "gamenet/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gamenet::eval {

namespace {

nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double mean_of(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

double quantile_sorted(const std::vector<double>& s, double q)
{
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + (s[hi] - s[lo]) * frac;
}

} // namespace

nlohmann::json MetricsReport::to_json() const
{
    return {{"r2", number_or_null(r2)}, {"mae", mae},           {"mse", mse},
            {"relmse", number_or_null(relmse)}, {"n", n}, {"r2_defined", r2_defined}};
}

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat)
{
    if (y.size() != yhat.size())
        throw ShapeError("metrics: " + std::to_string(y.size()) + " targets vs " + std::to_string(yhat.size()) +
                         " predictions");
    if (y.size() < 2)
        throw DataError("metrics: need at least two samples");
    MetricsReport m;
    m.n = y.size();
    const double ybar = mean_of(y);
    double sse = 0.0;
    double sst = 0.0;
    double sae = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(yhat[i]))
            throw NumericError("metrics: non-finite value at row " + std::to_string(i));
        const double e = y[i] - yhat[i];
        sse += e * e;
        sae += std::abs(e);
        const double d = y[i] - ybar;
        sst += d * d;
    }
    const double n = static_cast<double>(m.n);
    m.mae = sae / n;
    m.mse = sse / n;
    if (sst > 0.0) {
        m.relmse = sse / sst;
        m.r2 = 1.0 - m.relmse;
    } else {
        m.r2_defined = false;
        m.r2 = std::numeric_limits<double>::quiet_NaN();
        m.relmse = std::numeric_limits<double>::quiet_NaN();
    }
    return m;
}

nlohmann::json Summary::to_json() const
{
    return {{"mean", mean}, {"stdev", stdev}, {"min", min}, {"q25", q25},
            {"median", median}, {"q75", q75}, {"max", max}};
}

Summary summarize(std::span<const double> v)
{
    if (v.empty())
        throw DataError("summarize: empty input");
    Summary s;
    s.mean = mean_of(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - s.mean) * (x - s.mean);
    s.stdev = std::sqrt(ss / static_cast<double>(v.size()));
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    s.q25 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q75 = quantile_sorted(sorted, 0.75);
    return s;
}

double skewness(std::span<const double> v)
{
    if (v.empty())
        return 0.0;
    const double m = mean_of(v);
    double m2 = 0.0;
    double m3 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    if (m2 <= 0.0)
        return 0.0;
    return m3 / std::pow(m2, 1.5);
}

nlohmann::json ErrorAnalysis::to_json() const
{
    nlohmann::json decades = nlohmann::json::object();
    for (const auto& [d, a] : decade_gate_mean)
        decades[std::to_string(d)] = {{"audio", a[0]}, {"lyrics", a[1]}, {"social", a[2]}, {"n", decade_count.at(d)}};
    return {{"residual", {{"mean", residual_mean}, {"stdev", residual_stdev}, {"skew", residual_skew}}},
            {"actual", actual.to_json()},
            {"predicted", predicted.to_json()},
            {"decade_gate_mean", decades}};
}

ErrorAnalysis error_analysis(std::span<const double> y, std::span<const double> yhat, std::span<const int> years,
                             const Matrix* alpha)
{
    if (y.size() != yhat.size())
        throw ShapeError("error analysis: targets and predictions differ in length");
    if (y.empty())
        throw DataError("error analysis: empty input");
    ErrorAnalysis out;
    std::vector<double> res(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        res[i] = yhat[i] - y[i];
    const Summary rs = summarize(res);
    out.residual_mean = rs.mean;
    out.residual_stdev = rs.stdev;
    out.residual_skew = skewness(res);
    out.actual = summarize(y);
    out.predicted = summarize(yhat);

    if (alpha && !years.empty()) {
        if (years.size() != y.size() || alpha->rows() != y.size() || alpha->cols() != 3)
            throw ShapeError("error analysis: years / gate weights do not match row count");
        for (std::size_t i = 0; i < y.size(); ++i) {
            const int decade = static_cast<int>(std::floor(years[i] / 10.0)) * 10;
            auto& acc = out.decade_gate_mean[decade];
            for (std::size_t k = 0; k < 3; ++k)
                acc[k] += (*alpha)(i, k);
            ++out.decade_count[decade];
        }
        for (auto& [d, acc] : out.decade_gate_mean)
            for (double& v : acc)
                v /= static_cast<double>(out.decade_count[d]);
    }
    return out;
}

} // namespace gamenet::eval
