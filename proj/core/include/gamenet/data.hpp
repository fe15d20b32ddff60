#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gamenet::data {

struct TrackRecord {
    std::string track_id;
    std::string artist_id;
    int release_year = 0;
    std::string language;
    std::string lyrics;
    int popularity = 0; ///< 0..100
};

struct CleaningConfig {
    int min_year = 1960; ///< inclusive
    /// Empty means every language is accepted.
    std::set<std::string> languages;
    std::optional<std::size_t> min_lyrics_chars;
    std::optional<std::size_t> max_lyrics_chars;

    void validate() const;
};

/// First failing check, in this order.
enum class RejectReason { Year, Language, LyricsLength };
std::string to_string(RejectReason r);

std::optional<RejectReason> rejection_reason(const TrackRecord& r, const CleaningConfig& cfg);

struct CleanResult {
    std::vector<TrackRecord> kept;
    std::map<std::string, std::size_t> rejected; ///< reason -> count, every reason present
};

CleanResult clean(const std::vector<TrackRecord>& records, const CleaningConfig& cfg);

struct LyricsConfig {
    std::set<std::string> annotations{"instrumental", "spoken", "guitar solo"}; ///< lowercase
    std::size_t max_repeat = 16;
};

/// Line endings to LF, whitespace collapsed and trimmed, trailing [xN]
/// markers expanded into N copies of the line (capped), annotation-only
/// lines removed. Idempotent.
std::string normalize_lyrics(std::string_view text, const LyricsConfig& cfg = {});

/// metadata CSV: track_id, artist_id, year, language, popularity.
/// Lyrics, when given, are joined by track_id from a (track_id, lyrics) CSV.
std::vector<TrackRecord> read_tracks(const std::filesystem::path& metadata,
                                     const std::optional<std::filesystem::path>& lyrics = std::nullopt);
void write_metadata(const std::filesystem::path& path, const std::vector<TrackRecord>& records);
void write_lyrics(const std::filesystem::path& path, const std::vector<TrackRecord>& records);

} // namespace gamenet::data
