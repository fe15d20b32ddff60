#include "gamenet/ctd.hpp"

#include "gamenet/csv.hpp"
#include "gamenet/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace gamenet::ctd {
namespace {

double ratio(double num, double den)
{
    return den > 0.0 ? num / den : 0.0;
}

bool all_digits(std::string_view s)
{
    if (!s.empty() && s.front() == '-')
        s.remove_prefix(1);
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int read_fixed(std::string_view s, std::size_t pos, std::size_t len)
{
    if (pos + len > s.size())
        throw DataError("truncated timestamp '" + std::string(s) + "'");
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (s[i] < '0' || s[i] > '9')
            throw DataError("bad timestamp '" + std::string(s) + "'");
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

const char* kYearlyMetrics[] = {"total_plays", "unique_listeners", "repeat_listeners",
                                "median_plays_per_listener"};

} // namespace

void YearWindow::validate() const
{
    if (last_year < first_year)
        throw ConfigError("year window: last year before first year");
}

int utc_year(std::int64_t epoch_seconds)
{
    using namespace std::chrono;
    const sys_seconds tp{seconds{epoch_seconds}};
    const year_month_day ymd{floor<days>(tp)};
    return static_cast<int>(ymd.year());
}

std::int64_t parse_timestamp(std::string_view text)
{
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r'))
        text.remove_suffix(1);
    while (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
    if (all_digits(text))
        return csv::parse_int(text);

    using namespace std::chrono;
    const int y = read_fixed(text, 0, 4);
    if (text.size() < 10 || text[4] != '-' || text[7] != '-')
        throw DataError("bad timestamp '" + std::string(text) + "'");
    const int mo = read_fixed(text, 5, 2);
    const int d = read_fixed(text, 8, 2);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok())
        throw DataError("invalid date in timestamp '" + std::string(text) + "'");
    std::int64_t secs = sys_days{ymd}.time_since_epoch().count() * 86400LL;
    std::size_t pos = 10;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        const int hh = read_fixed(text, pos + 1, 2);
        if (pos + 3 >= text.size() || text[pos + 3] != ':')
            throw DataError("bad time in timestamp '" + std::string(text) + "'");
        const int mm = read_fixed(text, pos + 4, 2);
        int ss = 0;
        pos += 6;
        if (pos < text.size() && text[pos] == ':') {
            ss = read_fixed(text, pos + 1, 2);
            pos += 3;
            if (pos < text.size() && text[pos] == '.') {
                ++pos;
                while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9')
                    ++pos;
            }
        }
        if (hh > 23 || mm > 59 || ss > 60)
            throw DataError("bad time in timestamp '" + std::string(text) + "'");
        secs += hh * 3600LL + mm * 60LL + ss;
    }
    if (pos < text.size()) {
        if (text[pos] == 'Z' && pos + 1 == text.size())
            return secs;
        if (text[pos] != '+' && text[pos] != '-')
            throw DataError("bad timezone in timestamp '" + std::string(text) + "'");
        const int sign = text[pos] == '+' ? 1 : -1;
        const int oh = read_fixed(text, pos + 1, 2);
        int om = 0;
        std::size_t end = pos + 3;
        if (end < text.size()) {
            if (text[end] == ':')
                ++end;
            om = read_fixed(text, end, 2);
            end += 2;
        }
        if (end != text.size())
            throw DataError("bad timezone in timestamp '" + std::string(text) + "'");
        secs -= sign * (oh * 3600LL + om * 60LL);
    }
    return secs;
}

bool add_event(EventCounts& counts, const ListeningEvent& ev, const YearWindow& window)
{
    const int year = utc_year(ev.timestamp);
    if (!window.contains(year))
        return false;
    ++counts[{ev.track_id, year}][ev.user_id];
    return true;
}

IngestResult ingest_events(std::span<const ListeningEvent> events, const YearWindow& window)
{
    window.validate();
    IngestResult r;
    for (const auto& ev : events) {
        ++r.stats.rows;
        if (ev.user_id.empty() || ev.track_id.empty()) {
            ++r.stats.malformed;
            continue;
        }
        if (add_event(r.counts, ev, window))
            ++r.stats.accepted;
        else
            ++r.stats.out_of_window;
    }
    return r;
}

IngestResult ingest_events(std::istream& in, const YearWindow& window)
{
    window.validate();
    std::string header_line;
    if (!std::getline(in, header_line))
        return {};
    if (!header_line.empty() && header_line.back() == '\r')
        header_line.pop_back();
    const char delim = csv::detect_delimiter(header_line);
    std::vector<std::string> header;
    {
        std::istringstream hs(header_line);
        csv::Reader hr(hs, delim);
        hr.next(header);
    }
    csv::Table layout{header, {}};
    const std::size_t cu = layout.column("user_id");
    const std::size_t ct = layout.column("track_id");
    const std::size_t cts = layout.column("timestamp");

    IngestResult r;
    csv::Reader reader(in, delim);
    std::vector<std::string> f;
    while (true) {
        try {
            if (!reader.next(f))
                break;
        } catch (const DataError&) {
            ++r.stats.rows;
            ++r.stats.malformed;
            break;
        }
        if (f.size() == 1 && f[0].empty())
            continue;
        ++r.stats.rows;
        if (f.size() != header.size() || f[cu].empty() || f[ct].empty()) {
            ++r.stats.malformed;
            continue;
        }
        ListeningEvent ev{f[cu], f[ct], 0};
        try {
            ev.timestamp = parse_timestamp(f[cts]);
        } catch (const DataError&) {
            ++r.stats.malformed;
            continue;
        }
        if (add_event(r.counts, ev, window))
            ++r.stats.accepted;
        else
            ++r.stats.out_of_window;
    }
    return r;
}

IngestResult ingest_events(const std::filesystem::path& path, const YearWindow& window)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot read event log " + path.string());
    return ingest_events(in, window);
}

void merge_counts(EventCounts& into, const EventCounts& from)
{
    for (const auto& [key, users] : from) {
        auto& dst = into[key];
        for (const auto& [user, n] : users)
            dst[user] += n;
    }
}

double median(std::vector<double> values)
{
    if (values.empty())
        return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1)
        return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TrackYearStats compute_track_year_stats(const UserCounts& users, int year)
{
    TrackYearStats s;
    s.year = year;
    std::vector<double> per_user;
    per_user.reserve(users.size());
    for (const auto& [user, n] : users) {
        if (n == 0)
            continue;
        s.total_plays += n;
        ++s.unique_listeners;
        if (n >= 2)
            ++s.repeat_listeners;
        per_user.push_back(static_cast<double>(n));
    }
    s.median_plays_per_listener = median(std::move(per_user));
    return s;
}

std::vector<TrackYearStats> yearly_stats(const EventCounts& counts, const std::string& track_id,
                                         const YearWindow& window)
{
    std::vector<TrackYearStats> out;
    out.reserve(window.size());
    for (int y = window.first_year; y <= window.last_year; ++y) {
        auto it = counts.find({track_id, y});
        if (it == counts.end()) {
            TrackYearStats zero;
            zero.year = y;
            out.push_back(zero);
        } else {
            out.push_back(compute_track_year_stats(it->second, y));
        }
    }
    return out;
}

SongCTD compute_song_ctd(std::span<const TrackYearStats> yearly)
{
    SongCTD s;
    s.years.assign(yearly.begin(), yearly.end());
    std::vector<double> medians;
    for (const auto& y : yearly) {
        s.total_plays += y.total_plays;
        s.unique_listeners += y.unique_listeners;
        s.repeat_listeners += y.repeat_listeners;
        if (y.unique_listeners > 0)
            medians.push_back(y.median_plays_per_listener);
    }
    s.median_plays_per_listener = median(std::move(medians));
    s.loyalty_rate = ratio(static_cast<double>(s.repeat_listeners), static_cast<double>(s.unique_listeners));
    s.repeat_ratio = ratio(static_cast<double>(s.total_plays - s.unique_listeners),
                           static_cast<double>(s.total_plays));
    return s;
}

ArtistYearSeries pool_artist_years(std::span<const std::vector<TrackYearStats>> tracks)
{
    if (tracks.empty())
        throw DataError("artist CTD needs at least one track");
    const std::size_t years = tracks.front().size();
    ArtistYearSeries s;
    s.loyalty.assign(years, 0.0);
    s.reach.assign(years, 0.0);
    s.engagement.assign(years, 0.0);
    s.has_listeners.assign(years, false);
    for (std::size_t y = 0; y < years; ++y) {
        std::uint64_t rep = 0;
        std::uint64_t uni = 0;
        std::vector<double> medians;
        for (const auto& t : tracks) {
            if (t.size() != years)
                throw ShapeError("artist CTD: tracks cover different year windows");
            rep += t[y].repeat_listeners;
            uni += t[y].unique_listeners;
            if (t[y].unique_listeners > 0)
                medians.push_back(t[y].median_plays_per_listener);
        }
        s.loyalty[y] = ratio(static_cast<double>(rep), static_cast<double>(uni));
        s.reach[y] = static_cast<double>(uni);
        s.engagement[y] = median(std::move(medians));
        s.has_listeners[y] = uni > 0;
    }
    return s;
}

double ols_slope(std::span<const double> ys)
{
    const std::size_t n = ys.size();
    if (n < 2)
        return 0.0;
    const double xbar = static_cast<double>(n - 1) / 2.0;
    double ybar = 0.0;
    for (double y : ys)
        ybar += y;
    ybar /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - xbar;
        sxy += dx * (ys[i] - ybar);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

double population_stdev(std::span<const double> xs)
{
    if (xs.empty())
        return 0.0;
    double mean = 0.0;
    for (double x : xs)
        mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

ArtistCTD compute_artist_ctd(std::span<const std::vector<TrackYearStats>> tracks)
{
    const ArtistYearSeries s = pool_artist_years(tracks);
    ArtistCTD a;
    double sum = 0.0;
    std::size_t active = 0;
    for (std::size_t y = 0; y < s.loyalty.size(); ++y) {
        if (s.has_listeners[y]) {
            sum += s.loyalty[y];
            ++active;
        }
    }
    a.loyalty_rate = active > 0 ? sum / static_cast<double>(active) : 0.0;
    a.loyalty_growth_rate = ols_slope(s.loyalty);
    std::vector<double> log_reach(s.reach.size());
    std::transform(s.reach.begin(), s.reach.end(), log_reach.begin(), [](double r) { return std::log1p(r); });
    a.reach_growth_rate = ols_slope(log_reach);
    a.loyalty_consistency = 1.0 / (1.0 + population_stdev(s.loyalty));
    a.engagement_consistency = 1.0 / (1.0 + population_stdev(s.engagement));
    return a;
}

std::string to_string(Mode mode)
{
    return mode == Mode::Aggregate ? "aggregate" : "temporal";
}

Mode parse_mode(const std::string& name)
{
    if (name == "aggregate")
        return Mode::Aggregate;
    if (name == "temporal")
        return Mode::Temporal;
    throw ConfigError("unknown CTD mode '" + name + "'");
}

Schema Schema::make(Mode mode, YearWindow window)
{
    window.validate();
    Schema s;
    s.mode = mode;
    s.window = window;
    s.names = {"song_total_plays",
               "song_unique_listeners",
               "song_repeat_listeners",
               "song_median_plays_per_listener",
               "song_loyalty_rate",
               "song_repeat_ratio",
               "artist_loyalty_rate",
               "artist_loyalty_growth_rate",
               "artist_reach_growth_rate",
               "artist_loyalty_consistency",
               "artist_engagement_consistency"};
    if (mode == Mode::Temporal)
        for (int y = window.first_year; y <= window.last_year; ++y)
            for (const char* metric : kYearlyMetrics)
                s.names.push_back(std::string("song_") + metric + "_" + std::to_string(y));
    return s;
}

nlohmann::json Schema::to_json() const
{
    std::vector<int> years;
    for (int y = window.first_year; y <= window.last_year; ++y)
        years.push_back(y);
    return nlohmann::json{{"mode", to_string(mode)}, {"window_years", years}, {"features", names}};
}

Schema Schema::from_json(const nlohmann::json& j)
{
    const auto years = j.at("window_years").get<std::vector<int>>();
    if (years.empty())
        throw DataError("CTD schema: empty window");
    Schema s;
    s.mode = parse_mode(j.at("mode").get<std::string>());
    s.window = {years.front(), years.back()};
    s.names = j.at("features").get<std::vector<std::string>>();
    return s;
}

std::vector<double> assemble_ctd_vector(const SongCTD& song, const ArtistCTD& artist, const Schema& schema)
{
    const Schema expected = Schema::make(schema.mode, schema.window);
    if (schema.names != expected.names)
        throw ShapeError("CTD schema does not match mode '" + to_string(schema.mode) + "'");
    if (song.years.size() != schema.window.size())
        throw ShapeError("CTD song stats cover " + std::to_string(song.years.size()) +
                         " years, schema window has " + std::to_string(schema.window.size()));
    std::vector<double> v{static_cast<double>(song.total_plays),
                          static_cast<double>(song.unique_listeners),
                          static_cast<double>(song.repeat_listeners),
                          song.median_plays_per_listener,
                          song.loyalty_rate,
                          song.repeat_ratio,
                          artist.loyalty_rate,
                          artist.loyalty_growth_rate,
                          artist.reach_growth_rate,
                          artist.loyalty_consistency,
                          artist.engagement_consistency};
    if (schema.mode == Mode::Temporal) {
        for (const auto& y : song.years) {
            v.push_back(static_cast<double>(y.total_plays));
            v.push_back(static_cast<double>(y.unique_listeners));
            v.push_back(static_cast<double>(y.repeat_listeners));
            v.push_back(y.median_plays_per_listener);
        }
    }
    return v;
}

Dataset build_dataset(const EventCounts& counts, const std::map<std::string, std::string>& track_artist,
                      const Schema& schema)
{
    std::set<std::string> tracks;
    for (const auto& [key, users] : counts)
        if (schema.window.contains(key.second) && track_artist.count(key.first))
            tracks.insert(key.first);

    std::map<std::string, std::vector<std::string>> artist_tracks;
    std::map<std::string, std::vector<TrackYearStats>> stats;
    for (const auto& t : tracks) {
        artist_tracks[track_artist.at(t)].push_back(t);
        stats[t] = yearly_stats(counts, t, schema.window);
    }
    std::map<std::string, ArtistCTD> artists;
    for (const auto& [artist, ts] : artist_tracks) {
        std::vector<std::vector<TrackYearStats>> pooled;
        for (const auto& t : ts)
            pooled.push_back(stats.at(t));
        artists[artist] = compute_artist_ctd(pooled);
    }

    Dataset d;
    d.schema = schema;
    d.features = Matrix(tracks.size(), schema.names.size());
    std::size_t r = 0;
    for (const auto& t : tracks) {
        const SongCTD song = compute_song_ctd(stats.at(t));
        const auto v = assemble_ctd_vector(song, artists.at(track_artist.at(t)), schema);
        std::copy(v.begin(), v.end(), d.features.row(r).begin());
        d.track_ids.push_back(t);
        ++r;
    }
    return d;
}

} // namespace gamenet::ctd
