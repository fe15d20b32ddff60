#include "gamenet/data.hpp"

#include "gamenet/csv.hpp"
#include "gamenet/error.hpp"

#include <fstream>
#include <unordered_map>

namespace gamenet::data {

void CleaningConfig::validate() const
{
    if (min_lyrics_chars && *min_lyrics_chars == 0)
        throw ConfigError("minimum lyrics length must be positive");
    if (max_lyrics_chars && *max_lyrics_chars == 0)
        throw ConfigError("maximum lyrics length must be positive");
    if (min_lyrics_chars && max_lyrics_chars && *min_lyrics_chars >= *max_lyrics_chars)
        throw ConfigError("minimum lyrics length must be below the maximum");
}

std::string to_string(RejectReason r)
{
    switch (r) {
    case RejectReason::Year: return "year";
    case RejectReason::Language: return "language";
    case RejectReason::LyricsLength: return "lyrics_length";
    }
    return "unknown";
}

std::optional<RejectReason> rejection_reason(const TrackRecord& r, const CleaningConfig& cfg)
{
    if (r.release_year < cfg.min_year)
        return RejectReason::Year;
    if (!cfg.languages.empty() && !cfg.languages.contains(r.language))
        return RejectReason::Language;
    const std::size_t len = r.lyrics.size();
    if ((cfg.min_lyrics_chars && len < *cfg.min_lyrics_chars) || (cfg.max_lyrics_chars && len > *cfg.max_lyrics_chars))
        return RejectReason::LyricsLength;
    return std::nullopt;
}

CleanResult clean(const std::vector<TrackRecord>& records, const CleaningConfig& cfg)
{
    cfg.validate();
    CleanResult out;
    for (auto r : {RejectReason::Year, RejectReason::Language, RejectReason::LyricsLength})
        out.rejected[to_string(r)] = 0;
    for (const auto& rec : records) {
        if (auto why = rejection_reason(rec, cfg))
            ++out.rejected[to_string(*why)];
        else
            out.kept.push_back(rec);
    }
    return out;
}

std::vector<TrackRecord> read_tracks(const std::filesystem::path& metadata,
                                     const std::optional<std::filesystem::path>& lyrics)
{
    const csv::Table t = csv::read_table(metadata);
    const std::size_t c_id = t.column("track_id");
    const std::size_t c_artist = t.column("artist_id");
    const std::size_t c_year = t.column("year");
    const std::size_t c_lang = t.column("language");
    const std::size_t c_pop = t.column("popularity");

    std::unordered_map<std::string, std::string> texts;
    if (lyrics) {
        const csv::Table lt = csv::read_table(*lyrics);
        const std::size_t l_id = lt.column("track_id");
        const std::size_t l_text = lt.column("lyrics");
        for (const auto& row : lt.rows)
            texts[row[l_id]] = row[l_text];
    }

    std::vector<TrackRecord> out;
    out.reserve(t.rows.size());
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        TrackRecord r;
        r.track_id = row[c_id];
        if (r.track_id.empty())
            throw DataError(metadata.string() + ": empty track_id on data row " + std::to_string(i + 1));
        if (!seen.emplace(r.track_id, i).second)
            throw DataError(metadata.string() + ": duplicate track_id '" + r.track_id + "'");
        r.artist_id = row[c_artist];
        r.release_year = static_cast<int>(csv::parse_int(row[c_year]));
        r.language = row[c_lang];
        const long long pop = csv::parse_int(row[c_pop]);
        if (pop < 0 || pop > 100)
            throw DataError(metadata.string() + ": popularity out of [0, 100] for '" + r.track_id + "'");
        r.popularity = static_cast<int>(pop);
        if (auto it = texts.find(r.track_id); it != texts.end())
            r.lyrics = it->second;
        out.push_back(std::move(r));
    }
    return out;
}

void write_metadata(const std::filesystem::path& path, const std::vector<TrackRecord>& records)
{
    csv::Table t;
    t.header = {"track_id", "artist_id", "year", "language", "popularity"};
    for (const auto& r : records)
        t.rows.push_back({r.track_id, r.artist_id, std::to_string(r.release_year), r.language,
                          std::to_string(r.popularity)});
    csv::write_table(path, t);
}

void write_lyrics(const std::filesystem::path& path, const std::vector<TrackRecord>& records)
{
    csv::Table t;
    t.header = {"track_id", "lyrics"};
    for (const auto& r : records)
        t.rows.push_back({r.track_id, r.lyrics});
    csv::write_table(path, t);
}

} // namespace gamenet::data
