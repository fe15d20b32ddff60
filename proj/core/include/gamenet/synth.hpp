#pragma once

#include "gamenet/ctd.hpp"
#include "gamenet/data.hpp"
#include "gamenet/matrix.hpp"
#include "gamenet/onion_ae.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gamenet::data {

struct SynthAudioGroup {
    std::string name;
    std::size_t dim = 0;
    std::size_t bottleneck = 0;
};

/// Latent-factor generator for multimodal popularity data.
///
/// Each modality m has latents z_m ~ N(0, I_k) and features z_m A_m + noise.
/// The target is y* = sum_m c_m (u_m . z_m) + target_noise * e with unit
/// vectors u_m, mapped to popularity round(50 + 15 y* / sd(y*)) in [0, 100].
/// Listening events are driven by the social projection u_social . z_social.
struct SynthConfig {
    std::size_t n = 500;
    std::vector<SynthAudioGroup> audio_groups{{"timbre", 40, 6}, {"rhythm", 24, 4}};
    std::size_t lyrics_dim = 32;
    std::size_t social_dim = 16;
    std::size_t latent_dim = 4;
    std::array<double, 3> coefficients{0.0, 0.0, 1.0}; ///< audio, lyrics, social
    double target_noise = 0.2;
    double feature_noise = 0.1;
    /// Embeddings are emitted at this scale (a constant scaler undoes it).
    double lyrics_scale = 0.01;
    std::uint64_t seed = 46;

    std::size_t artists = 0; ///< 0 means n / 8 (at least 1)
    std::size_t users = 200;
    int min_release_year = 1955;
    int max_release_year = 2020;
    std::vector<std::string> languages{"en", "es", "pt", "ko", "fr"};
    std::vector<double> language_weights{0.6, 0.15, 0.1, 0.1, 0.05};
    double short_lyrics_fraction = 0.03;
    bool events = true;
    ctd::YearWindow window;
    double listeners_per_year = 4.0;

    std::size_t audio_dim() const;
    void validate() const;
    nlohmann::json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthDataset {
    std::vector<TrackRecord> records;
    std::vector<std::string> ids;
    std::array<Matrix, 3> latents;   ///< n x latent_dim each
    Matrix audio;                    ///< n x audio_dim
    Matrix lyrics;                   ///< n x lyrics_dim (scaled)
    Matrix social;                   ///< n x social_dim
    std::vector<double> y_star;
    std::vector<ctd::ListeningEvent> events;
    ae::GroupRegistry audio_registry;
};

SynthDataset synth_generate(const SynthConfig& cfg);

/// Writes metadata.csv, lyrics.csv, events.csv, audio_raw.csv,
/// audio_registry.json, lyrics_emb.csv, social.csv and latents.csv.
void write_synth(const std::filesystem::path& dir, const SynthDataset& ds);

} // namespace gamenet::data
