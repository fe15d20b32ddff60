#pragma once

#include "gamenet/matrix.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/// Career Trajectory Dynamics: listening-event aggregation into song-level
/// yearly engagement metrics and artist-level trajectory features.
namespace gamenet::ctd {

struct ListeningEvent {
    std::string user_id;
    std::string track_id;
    std::int64_t timestamp = 0; ///< UTC epoch seconds
};

/// Inclusive range of UTC calendar years.
struct YearWindow {
    int first_year = 2016;
    int last_year = 2020;

    std::size_t size() const noexcept { return static_cast<std::size_t>(last_year - first_year + 1); }
    bool contains(int year) const noexcept { return year >= first_year && year <= last_year; }
    void validate() const;
};

int utc_year(std::int64_t epoch_seconds);
/// Epoch seconds, or ISO-8601 "YYYY-MM-DD[(T| )HH:MM[:SS[.f]]][Z|(+|-)HH[:MM]]".
std::int64_t parse_timestamp(std::string_view text);

using UserCounts = std::map<std::string, std::uint64_t>;
using TrackYear = std::pair<std::string, int>;
/// (track_id, year) -> per-user play counts.
using EventCounts = std::map<TrackYear, UserCounts>;

struct IngestStats {
    std::uint64_t rows = 0;
    std::uint64_t accepted = 0;
    std::uint64_t malformed = 0;
    std::uint64_t out_of_window = 0;
};

struct IngestResult {
    EventCounts counts;
    IngestStats stats;
};

/// Adds one event. Returns false (and changes nothing) if it falls outside the window.
bool add_event(EventCounts& counts, const ListeningEvent& ev, const YearWindow& window);

IngestResult ingest_events(std::span<const ListeningEvent> events, const YearWindow& window);
/// Delimited text with a header naming user_id, track_id and timestamp.
/// Malformed rows and out-of-window events are counted and skipped.
IngestResult ingest_events(std::istream& in, const YearWindow& window);
IngestResult ingest_events(const std::filesystem::path& path, const YearWindow& window);

/// Sum of disjoint or overlapping partial aggregations.
void merge_counts(EventCounts& into, const EventCounts& from);

struct TrackYearStats {
    int year = 0;
    std::uint64_t total_plays = 0;
    std::uint64_t unique_listeners = 0;
    std::uint64_t repeat_listeners = 0; ///< users with >= 2 plays in the year
    double median_plays_per_listener = 0.0;

    friend bool operator==(const TrackYearStats&, const TrackYearStats&) = default;
};

/// Median of a multiset; the mean of the two middle values for even sizes, 0 if empty.
double median(std::vector<double> values);

TrackYearStats compute_track_year_stats(const UserCounts& users, int year);

/// Zero-filled per-year stats for one track across the window.
std::vector<TrackYearStats> yearly_stats(const EventCounts& counts, const std::string& track_id,
                                         const YearWindow& window);

struct SongCTD {
    std::vector<TrackYearStats> years;
    std::uint64_t total_plays = 0;
    std::uint64_t unique_listeners = 0;
    std::uint64_t repeat_listeners = 0;
    /// Median over the yearly medians of years that had listeners.
    double median_plays_per_listener = 0.0;
    double loyalty_rate = 0.0;
    double repeat_ratio = 0.0;
};

SongCTD compute_song_ctd(std::span<const TrackYearStats> yearly);

struct ArtistCTD {
    double loyalty_rate = 0.0;
    double loyalty_growth_rate = 0.0;
    double reach_growth_rate = 0.0;
    double loyalty_consistency = 1.0;
    double engagement_consistency = 1.0;
};

/// Per-year series pooled over an artist's tracks.
struct ArtistYearSeries {
    std::vector<double> loyalty;    ///< pooled repeat / pooled unique
    std::vector<double> reach;      ///< pooled unique listeners
    std::vector<double> engagement; ///< median of the tracks' yearly medians
    std::vector<bool> has_listeners;
};

/// Each element is one track's window-aligned yearly stats.
ArtistYearSeries pool_artist_years(std::span<const std::vector<TrackYearStats>> tracks);

/// loyalty_rate: mean loyalty over years with listeners; growth rates: OLS
/// slope against the year index of loyalty and of log(1 + reach);
/// consistencies: 1 / (1 + population stdev) of loyalty and engagement.
ArtistCTD compute_artist_ctd(std::span<const std::vector<TrackYearStats>> tracks);

double ols_slope(std::span<const double> ys);
double population_stdev(std::span<const double> xs);

enum class Mode { Aggregate, Temporal };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

struct Schema {
    Mode mode = Mode::Aggregate;
    YearWindow window;
    std::vector<std::string> names;

    /// Default layout: 4 song aggregates, 2 song ratios, 5 artist features,
    /// then (temporal mode) 4 yearly metrics for every window year.
    static Schema make(Mode mode, YearWindow window = {});
    nlohmann::json to_json() const;
    static Schema from_json(const nlohmann::json& j);
};

/// Throws ShapeError if the schema does not match its mode / window or the
/// song stats do not cover the window.
std::vector<double> assemble_ctd_vector(const SongCTD& song, const ArtistCTD& artist, const Schema& schema);

struct Dataset {
    Schema schema;
    std::vector<std::string> track_ids; ///< sorted
    Matrix features;
};

/// CTD features for every track that has in-window events and a known artist.
/// Artist features pool all of that artist's tracks present in the log.
Dataset build_dataset(const EventCounts& counts, const std::map<std::string, std::string>& track_artist,
                      const Schema& schema);

} // namespace gamenet::ctd
