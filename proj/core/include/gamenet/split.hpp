#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gamenet::data {

enum class SplitLabel { Train, Test };
std::string to_string(SplitLabel s);
SplitLabel parse_split_label(const std::string& s);

struct SplitConfig {
    std::size_t bins = 5;
    double test_fraction = 0.2;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SplitAssignment {
    std::vector<SplitLabel> label;
    std::vector<std::size_t> bin;
    std::vector<double> edges; ///< bins - 1 upper edges, inclusive
    std::uint64_t seed = 0;
    double test_fraction = 0.0;

    std::vector<std::size_t> rows(SplitLabel which) const;
};

/// Nearest-rank quantile edges; a value equal to an edge goes to the lower bin.
std::vector<double> quantile_edges(std::span<const double> values, std::size_t bins);
std::size_t bin_of(double v, std::span<const double> edges);

/// Within each bin (in row order), one shared seeded shuffle sends
/// round(test_fraction * n_bin) rows to test.
SplitAssignment stratified_split(std::span<const double> popularity, const SplitConfig& cfg);

/// split CSV: track_id, bin, split.
void write_split(const std::filesystem::path& path, std::span<const std::string> ids, const SplitAssignment& s);
struct SplitTable {
    std::vector<std::string> ids;
    std::vector<std::size_t> bin;
    std::vector<SplitLabel> label;
};
SplitTable read_split(const std::filesystem::path& path);

} // namespace gamenet::data
