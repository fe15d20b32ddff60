#include "gamenet/split.hpp"

#include "gamenet/csv.hpp"
#include "gamenet/error.hpp"
#include "gamenet/rng.hpp"

#include <algorithm>
#include <cmath>

namespace gamenet::data {

std::string to_string(SplitLabel s) { return s == SplitLabel::Train ? "train" : "test"; }

SplitLabel parse_split_label(const std::string& s)
{
    if (s == "train")
        return SplitLabel::Train;
    if (s == "test")
        return SplitLabel::Test;
    throw DataError("unknown split label '" + s + "'");
}

void SplitConfig::validate() const
{
    if (bins == 0)
        throw ConfigError("split: bins must be positive");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("split: test fraction must be in (0, 1)");
}

std::vector<std::size_t> SplitAssignment::rows(SplitLabel which) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < label.size(); ++i)
        if (label[i] == which)
            out.push_back(i);
    return out;
}

std::vector<double> quantile_edges(std::span<const double> values, std::size_t bins)
{
    if (values.empty() || bins == 0)
        throw DataError("quantile_edges: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::vector<double> edges;
    for (std::size_t k = 1; k < bins; ++k) {
        // nearest rank: ceil(k * n / bins), 1-based
        std::size_t rank = (k * n + bins - 1) / bins;
        rank = std::clamp<std::size_t>(rank, 1, n);
        edges.push_back(sorted[rank - 1]);
    }
    return edges;
}

std::size_t bin_of(double v, std::span<const double> edges)
{
    return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
}

SplitAssignment stratified_split(std::span<const double> popularity, const SplitConfig& cfg)
{
    cfg.validate();
    if (popularity.size() < cfg.bins)
        throw DataError("split: " + std::to_string(popularity.size()) + " rows is fewer than " +
                        std::to_string(cfg.bins) + " bins");
    for (double v : popularity)
        if (!std::isfinite(v))
            throw NumericError("split: non-finite popularity value");

    SplitAssignment out;
    out.seed = cfg.seed;
    out.test_fraction = cfg.test_fraction;
    out.edges = quantile_edges(popularity, cfg.bins);
    out.bin.resize(popularity.size());
    out.label.assign(popularity.size(), SplitLabel::Train);

    std::vector<std::vector<std::size_t>> members(cfg.bins);
    for (std::size_t i = 0; i < popularity.size(); ++i) {
        out.bin[i] = bin_of(popularity[i], out.edges);
        members[out.bin[i]].push_back(i);
    }
    Rng rng(cfg.seed);
    for (auto& m : members) {
        rng.shuffle(std::span<std::size_t>(m));
        const auto n_test = static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(m.size())));
        for (std::size_t k = 0; k < n_test; ++k)
            out.label[m[k]] = SplitLabel::Test;
    }
    return out;
}

void write_split(const std::filesystem::path& path, std::span<const std::string> ids, const SplitAssignment& s)
{
    if (ids.size() != s.label.size())
        throw ShapeError("write_split: id count does not match assignment");
    csv::Table t;
    t.header = {"track_id", "bin", "split"};
    for (std::size_t i = 0; i < ids.size(); ++i)
        t.rows.push_back({ids[i], std::to_string(s.bin[i]), to_string(s.label[i])});
    csv::write_table(path, t);
}

SplitTable read_split(const std::filesystem::path& path)
{
    const csv::Table t = csv::read_table(path);
    const std::size_t c_id = t.column("track_id");
    const std::size_t c_bin = t.column("bin");
    const std::size_t c_split = t.column("split");
    SplitTable out;
    for (const auto& row : t.rows) {
        out.ids.push_back(row[c_id]);
        const long long b = csv::parse_int(row[c_bin]);
        if (b < 0)
            throw DataError(path.string() + ": negative bin");
        out.bin.push_back(static_cast<std::size_t>(b));
        out.label.push_back(parse_split_label(row[c_split]));
    }
    return out;
}

} // namespace gamenet::data
