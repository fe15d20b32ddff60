#include "gamenet/error.hpp"
#include "gamenet/metrics.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace gamenet;
using namespace gamenet::eval;

TEST_SUITE("metrics")
{
    TEST_CASE("perfect prediction")
    {
        const std::vector<double> y{3, 1, 4, 1, 5};
        const auto m = compute_metrics(y, y);
        CHECK(m.r2 == 1.0);
        CHECK(m.mae == 0.0);
        CHECK(m.mse == 0.0);
        CHECK(m.relmse == 0.0);
        CHECK(m.n == 5);
    }

    TEST_CASE("predicting the mean")
    {
        const std::vector<double> y{2, 4, 9};
        const std::vector<double> yhat(3, 5.0);
        const auto m = compute_metrics(y, yhat);
        CHECK(m.r2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
        CHECK(m.relmse == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("two-point example")
    {
        const std::vector<double> y{0, 1};
        const std::vector<double> yhat{0.5, 0.5};
        const auto m = compute_metrics(y, yhat);
        CHECK(m.mae == 0.5);
        CHECK(m.mse == 0.25);
        CHECK(m.r2 == 0.0);
    }

    TEST_CASE("constant targets leave r2 undefined")
    {
        const std::vector<double> y(4, 0.3);
        const std::vector<double> yhat{0.1, 0.2, 0.3, 0.4};
        const auto m = compute_metrics(y, yhat);
        CHECK_FALSE(m.r2_defined);
        CHECK(std::isnan(m.r2));
        CHECK(std::isnan(m.relmse));
        CHECK(m.to_json()["r2"].is_null());
    }

    TEST_CASE("bad input is rejected")
    {
        const std::vector<double> a{1, 2, 3}, b{1, 2};
        CHECK_THROWS_AS(compute_metrics(a, b), ShapeError);
        const std::vector<double> one{1};
        CHECK_THROWS_AS(compute_metrics(one, one), DataError);
    }

    TEST_CASE("r2 and relmse sum to one")
    {
        Rng rng(1);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> y(2 + rng.index(50)), yhat(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) {
                y[i] = rng.normal();
                yhat[i] = y[i] + rng.normal(0.0, rng.uniform(0.0, 2.0));
            }
            const auto m = compute_metrics(y, yhat);
            CHECK(std::abs(m.r2 + m.relmse - 1.0) < 1e-12);
        }
    }

    TEST_CASE("r2 is scale invariant and mae scales with the range")
    {
        Rng rng(2);
        for (int t = 0; t < 100; ++t) {
            std::vector<double> y(30), yhat(30), ys(30), yhats(30);
            for (std::size_t i = 0; i < 30; ++i) {
                y[i] = static_cast<double>(rng.index(101));
                yhat[i] = std::clamp(y[i] + rng.normal(0.0, 10.0), 0.0, 100.0);
                ys[i] = y[i] / 100.0;
                yhats[i] = yhat[i] / 100.0;
            }
            const auto a = compute_metrics(y, yhat);
            const auto b = compute_metrics(ys, yhats);
            CHECK(a.r2 == doctest::Approx(b.r2).epsilon(1e-12));
            CHECK(a.mae == doctest::Approx(100.0 * b.mae).epsilon(1e-12));
            CHECK(a.mse == doctest::Approx(1e4 * b.mse).epsilon(1e-12));
        }
    }
}

TEST_SUITE("error analysis")
{
    TEST_CASE("perfect prediction has zero residuals")
    {
        const std::vector<double> y{10, 50, 90};
        const auto e = error_analysis(y, y);
        CHECK(e.residual_mean == 0.0);
        CHECK(e.residual_stdev == 0.0);
    }

    TEST_CASE("constant shift")
    {
        const std::vector<double> y{10, 50, 90, 20};
        std::vector<double> yhat = y;
        for (double& v : yhat)
            v += 5.0;
        const auto e = error_analysis(y, yhat);
        CHECK(e.residual_mean == doctest::Approx(5.0).epsilon(1e-14));
        CHECK(e.residual_stdev == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
        CHECK(e.predicted.mean == doctest::Approx(e.actual.mean + 5.0));
    }

    TEST_CASE("gate weights are averaged per decade")
    {
        const std::vector<double> y{1, 2, 3};
        const std::vector<int> years{1961, 1969, 1975};
        const Matrix alpha = Matrix::from_rows({{0.2, 0.3, 0.5}, {0.4, 0.3, 0.3}, {1, 0, 0}});
        const auto e = error_analysis(y, y, years, &alpha);
        CHECK(e.decade_count.at(1960) == 2);
        CHECK(e.decade_gate_mean.at(1960)[0] == doctest::Approx(0.3));
        CHECK(e.decade_gate_mean.at(1970)[0] == 1.0);
    }

    TEST_CASE("summary quantiles interpolate")
    {
        const std::vector<double> v{1, 2, 3, 4};
        const auto s = summarize(v);
        CHECK(s.median == 2.5);
        CHECK(s.q25 == 1.75);
        CHECK(s.min == 1);
        CHECK(s.max == 4);
        CHECK(skewness(v) == doctest::Approx(0.0).scale(1.0));
    }
}
