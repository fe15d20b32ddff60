#include "gamenet/data.hpp"
#include "gamenet/error.hpp"
#include "gamenet/hash.hpp"
#include "gamenet/scaler.hpp"
#include "gamenet/split.hpp"
#include "gamenet/synth.hpp"

#include "test_support.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace gamenet;
using namespace gamenet::data;

namespace {

TrackRecord record(int year, std::string lang = "en", std::string lyrics = "some words here")
{
    static int next = 0;
    return {"T" + std::to_string(next++), "A1", year, std::move(lang), std::move(lyrics), 50};
}

std::vector<TrackRecord> random_records(Rng& rng, std::size_t n)
{
    const std::vector<std::string> langs{"en", "es", "ko", "fr", ""};
    std::vector<TrackRecord> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({"T" + std::to_string(i), "A" + std::to_string(rng.index(9)),
                       1940 + static_cast<int>(rng.index(90)), langs[rng.index(langs.size())],
                       std::string(rng.index(300), 'a'), static_cast<int>(rng.index(101))});
    return out;
}

std::filesystem::path temp_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("gamenet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("clean")
{
    TEST_CASE("year floor is inclusive")
    {
        const CleaningConfig cfg;
        CHECK(rejection_reason(record(1959), cfg) == RejectReason::Year);
        CHECK_FALSE(rejection_reason(record(1960), cfg).has_value());
        CHECK(to_string(RejectReason::Year) == "year");
    }

    TEST_CASE("language and lyrics length filters")
    {
        CleaningConfig cfg;
        cfg.languages = {"en"};
        cfg.min_lyrics_chars = 5;
        cfg.max_lyrics_chars = 20;
        CHECK(rejection_reason(record(2000, "es"), cfg) == RejectReason::Language);
        CHECK(rejection_reason(record(2000, "en", "abc"), cfg) == RejectReason::LyricsLength);
        CHECK(rejection_reason(record(2000, "en", std::string(21, 'x')), cfg) == RejectReason::LyricsLength);
        CHECK_FALSE(rejection_reason(record(2000, "en", std::string(20, 'x')), cfg).has_value());
    }

    TEST_CASE("kept count equals a brute-force predicate scan")
    {
        Rng rng(1);
        CleaningConfig cfg;
        cfg.languages = {"en", "ko"};
        cfg.min_lyrics_chars = 10;
        const auto recs = random_records(rng, 2000);
        const auto res = clean(recs, cfg);
        std::size_t expected = 0, year = 0, lang = 0, len = 0;
        for (const auto& r : recs) {
            if (r.release_year < 1960)
                ++year;
            else if (r.language != "en" && r.language != "ko")
                ++lang;
            else if (r.lyrics.size() < 10)
                ++len;
            else
                ++expected;
        }
        CHECK(res.kept.size() == expected);
        CHECK(res.rejected.at("year") == year);
        CHECK(res.rejected.at("language") == lang);
        CHECK(res.rejected.at("lyrics_length") == len);
    }

    TEST_CASE("cleaning is a per-record predicate")
    {
        Rng rng(2);
        auto recs = random_records(rng, 500);
        const CleaningConfig cfg;
        const auto a = clean(recs, cfg);
        rng.shuffle(std::span<TrackRecord>(recs));
        const auto b = clean(recs, cfg);
        std::set<std::string> ka, kb;
        for (const auto& r : a.kept)
            ka.insert(r.track_id);
        for (const auto& r : b.kept)
            kb.insert(r.track_id);
        CHECK(ka == kb);
        CHECK(a.rejected == b.rejected);
    }
}

TEST_SUITE("lyrics")
{
    TEST_CASE("repeat marker expands the line")
    {
        CHECK(normalize_lyrics("la la [x2]") == "la la\nla la");
    }

    TEST_CASE("annotation-only input becomes empty")
    {
        CHECK(normalize_lyrics("[Instrumental]").empty());
        CHECK(normalize_lyrics("verse one\n[Guitar Solo]\nverse two") == "verse one\nverse two");
    }

    TEST_CASE("whitespace and line endings are normalized")
    {
        CHECK(normalize_lyrics("  a \t b  \r\n\r\n\nc\r") == "a b\n\n\nc");
    }

    TEST_CASE("expansion is capped")
    {
        const auto out = normalize_lyrics("na [x1000]");
        CHECK(std::count(out.begin(), out.end(), '\n') == 15);
    }

    TEST_CASE("normalization is idempotent and strips every annotation line")
    {
        Rng rng(3);
        const std::vector<std::string> pieces{"la",   "[x2]", "[Instrumental]", "\n", "  ", "oh",
                                              "\r\n", "[spoken]", "yeah", "\t", "[x5]"};
        const LyricsConfig cfg;
        for (int t = 0; t < 500; ++t) {
            std::string s;
            for (std::size_t i = 0, n = rng.index(25); i < n; ++i)
                s += pieces[rng.index(pieces.size())] + (rng.uniform() < 0.5 ? " " : "");
            const auto once = normalize_lyrics(s, cfg);
            CHECK(normalize_lyrics(once, cfg) == once);
            std::istringstream lines(once);
            for (std::string line; std::getline(lines, line);) {
                std::string lower = line;
                std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
                for (const auto& a : cfg.annotations)
                    CHECK(lower != "[" + a + "]");
            }
        }
    }
}

TEST_SUITE("split")
{
    TEST_CASE("100 uniform rows give 20 test rows, 4 per bin")
    {
        std::vector<double> pop(100);
        std::iota(pop.begin(), pop.end(), 0.0);
        const auto s = stratified_split(pop, {});
        CHECK(s.rows(SplitLabel::Test).size() == 20);
        std::array<int, 5> per_bin{};
        for (std::size_t i = 0; i < pop.size(); ++i)
            if (s.label[i] == SplitLabel::Test)
                ++per_bin[s.bin[i]];
        for (int c : per_bin)
            CHECK(c == 4);
    }

    TEST_CASE("same seed, same assignment")
    {
        Rng rng(4);
        std::vector<double> pop(321);
        for (double& p : pop)
            p = static_cast<double>(rng.index(101));
        const auto a = stratified_split(pop, {5, 0.2, 9});
        const auto b = stratified_split(pop, {5, 0.2, 9});
        CHECK(a.label == b.label);
        CHECK(a.bin == b.bin);
        const auto c = stratified_split(pop, {5, 0.2, 10});
        CHECK(c.label != a.label);
    }

    TEST_CASE("fewer rows than bins is an error")
    {
        const std::vector<double> pop{1, 2, 3};
        CHECK_THROWS_AS(stratified_split(pop, {}), DataError);
    }

    TEST_CASE("every bin is within one row of the target fraction")
    {
        Rng rng(5);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> pop(5 + rng.index(2000));
            const bool ties = rng.uniform() < 0.5;
            for (double& p : pop)
                p = ties ? static_cast<double>(rng.index(101)) : rng.uniform(0, 100);
            const auto s = stratified_split(pop, {});
            std::vector<double> total(5), test(5);
            for (std::size_t i = 0; i < pop.size(); ++i) {
                total[s.bin[i]] += 1;
                if (s.label[i] == SplitLabel::Test)
                    test[s.bin[i]] += 1;
            }
            for (std::size_t b = 0; b < 5; ++b)
                CHECK(std::abs(test[b] - 0.2 * total[b]) <= 1.0);
        }
    }

    TEST_CASE("bin assignment follows the edges")
    {
        const std::vector<double> edges{10, 20};
        CHECK(bin_of(5, edges) == 0);
        CHECK(bin_of(10, edges) == 0);
        CHECK(bin_of(10.5, edges) == 1);
        CHECK(bin_of(25, edges) == 2);
    }

    TEST_CASE("split file round trip")
    {
        const auto dir = temp_dir("split");
        std::vector<double> pop(50);
        std::iota(pop.begin(), pop.end(), 0.0);
        const auto s = stratified_split(pop, {});
        std::vector<std::string> ids;
        for (int i = 0; i < 50; ++i)
            ids.push_back("T" + std::to_string(i));
        write_split(dir / "split.csv", ids, s);
        const auto t = read_split(dir / "split.csv");
        CHECK(t.ids == ids);
        CHECK(t.label == s.label);
        CHECK(t.bin == s.bin);
        std::filesystem::remove_all(dir);
    }
}

TEST_SUITE("scaler")
{
    TEST_CASE("minmax of 0, 50, 100")
    {
        const Matrix x = Matrix::from_rows({{0}, {50}, {100}});
        const auto s = ScalerParams::fit(x, ScalerKind::MinMax);
        CHECK(s.apply(x) == Matrix::from_rows({{0}, {0.5}, {1}}));
        CHECK(s.inverse(s.apply(x)) == x);
    }

    TEST_CASE("zscore of a constant column is zero")
    {
        const Matrix x(4, 1, 7.0);
        const auto y = ScalerParams::fit(x, ScalerKind::ZScore).apply(x);
        for (double v : y.values())
            CHECK(v == 0.0);
    }

    TEST_CASE("constant factor 100")
    {
        const auto s = ScalerParams::fit(Matrix(1, 1), ScalerKind::Constant, 100.0);
        CHECK(s.apply(Matrix(1, 1, 0.0031))(0, 0) == doctest::Approx(0.31).epsilon(1e-14));
    }

    TEST_CASE("unfitted or mismatched use is an error")
    {
        ScalerParams s;
        CHECK_THROWS_AS(s.apply(Matrix(1, 1)), StateError);
        const auto f = ScalerParams::fit(Matrix(3, 2, 1.0), ScalerKind::ZScore);
        CHECK_THROWS_AS(f.apply(Matrix(3, 3)), ShapeError);
    }

    TEST_CASE("parameters depend only on the rows they were fitted on")
    {
        Rng rng(6);
        Matrix train = testing::random_matrix(rng, 40, 3);
        Matrix test = testing::random_matrix(rng, 10, 3);
        for (ScalerKind k : {ScalerKind::ZScore, ScalerKind::MinMax}) {
            const auto before = ScalerParams::fit(train, k).to_json();
            for (double& v : test.values())
                v *= 1000.0;
            CHECK(ScalerParams::fit(train, k).to_json() == before);
            CHECK(ScalerParams::from_json(before).to_json() == before);
        }
    }

    TEST_CASE("fixed range maps 0..100 to 0..1")
    {
        const auto s = ScalerParams::fixed_range(1, 0.0, 100.0);
        CHECK(s.apply(Matrix(1, 1, 25.0))(0, 0) == 0.25);
    }
}

TEST_SUITE("synth")
{
    TEST_CASE("a single planted modality is linearly recoverable")
    {
        SynthConfig cfg;
        cfg.n = 2000;
        cfg.coefficients = {1.0, 0.0, 0.0};
        cfg.events = false;
        const auto ds = synth_generate(cfg);
        const auto n = static_cast<Eigen::Index>(cfg.n);
        const auto k = static_cast<Eigen::Index>(cfg.latent_dim);
        Eigen::MatrixXd a(n, k + 1);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            a(i, 0) = 1.0;
            for (Eigen::Index c = 0; c < k; ++c)
                a(i, c + 1) = ds.latents[0](static_cast<std::size_t>(i), static_cast<std::size_t>(c));
            y(i) = ds.records[static_cast<std::size_t>(i)].popularity;
        }
        const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(y);
        const double sse = (a * beta - y).squaredNorm();
        const double sst = (y.array() - y.mean()).square().sum();
        CHECK(1.0 - sse / sst >= 0.9);
    }

    TEST_CASE("no planted signal leaves popularity unexplained")
    {
        SynthConfig cfg;
        cfg.n = 1000;
        cfg.coefficients = {0.0, 0.0, 0.0};
        cfg.events = false;
        const auto ds = synth_generate(cfg);
        for (std::size_t m = 0; m < 3; ++m) {
            double sxy = 0, sxx = 0, syy = 0, mx = 0, my = 0;
            for (std::size_t i = 0; i < cfg.n; ++i) {
                mx += ds.latents[m](i, 0) / 1000.0;
                my += ds.records[i].popularity / 1000.0;
            }
            for (std::size_t i = 0; i < cfg.n; ++i) {
                const double dx = ds.latents[m](i, 0) - mx, dy = ds.records[i].popularity - my;
                sxy += dx * dy;
                sxx += dx * dx;
                syy += dy * dy;
            }
            CHECK(sxy * sxy / (sxx * syy) < 0.02);
        }
    }

    TEST_CASE("fixed seed gives byte-identical files")
    {
        SynthConfig cfg;
        cfg.n = 120;
        const auto d1 = temp_dir("synth1");
        const auto d2 = temp_dir("synth2");
        write_synth(d1, synth_generate(cfg));
        write_synth(d2, synth_generate(cfg));
        std::size_t files = 0;
        for (const auto& e : std::filesystem::directory_iterator(d1)) {
            CHECK(sha256_file(e.path()) == sha256_file(d2 / e.path().filename()));
            ++files;
        }
        CHECK(files >= 8);
        std::filesystem::remove_all(d1);
        std::filesystem::remove_all(d2);
    }

    TEST_CASE("written metadata reads back")
    {
        SynthConfig cfg;
        cfg.n = 60;
        const auto ds = synth_generate(cfg);
        const auto dir = temp_dir("synth_read");
        write_synth(dir, ds);
        const auto recs = read_tracks(dir / "metadata.csv", dir / "lyrics.csv");
        REQUIRE(recs.size() == ds.records.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(recs[i].track_id == ds.records[i].track_id);
            CHECK(recs[i].popularity == ds.records[i].popularity);
            CHECK(recs[i].lyrics == ds.records[i].lyrics);
        }
        std::filesystem::remove_all(dir);
    }
}
