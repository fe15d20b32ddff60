#include "gamenet/synth.hpp"

#include "gamenet/checkpoint.hpp"
#include "gamenet/csv.hpp"
#include "gamenet/error.hpp"
#include "gamenet/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace gamenet::data {

namespace {

const std::vector<std::string> kWords = {"love", "night", "fire", "heart", "run",   "away",  "dream", "light",
                                         "rain", "home",  "road", "gold",  "dance", "baby", "sky",   "tonight",
                                         "hold", "lost",  "time", "again", "city",  "stars", "blue",  "never"};

std::string pad_id(char prefix, std::size_t i, std::size_t width)
{
    std::string s = std::to_string(i);
    return std::string(1, prefix) + std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

Matrix mixing(Rng& rng, std::size_t k, std::size_t d)
{
    Matrix a(k, d);
    const double s = 1.0 / std::sqrt(static_cast<double>(k));
    for (double& v : a.values())
        v = rng.normal() * s;
    return a;
}

std::vector<double> unit_vector(Rng& rng, std::size_t k)
{
    std::vector<double> u(k);
    double norm = 0.0;
    for (double& v : u) {
        v = rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : u)
        v /= norm;
    return u;
}

std::size_t poisson(Rng& rng, double lambda)
{
    const double limit = std::exp(-lambda);
    std::size_t k = 0;
    double p = rng.uniform();
    while (p > limit) {
        ++k;
        p *= rng.uniform();
    }
    return k;
}

std::string make_lyrics(Rng& rng, bool short_text)
{
    auto line = [&] {
        std::string s;
        const std::size_t words = 3 + rng.index(4);
        for (std::size_t w = 0; w < words; ++w) {
            if (w)
                s += (rng.uniform() < 0.1) ? "  " : " ";
            s += kWords[rng.index(kWords.size())];
        }
        return s;
    };
    if (short_text)
        return line();
    std::string text;
    const std::size_t lines = 8 + rng.index(20);
    for (std::size_t i = 0; i < lines; ++i) {
        if (i)
            text += (rng.uniform() < 0.2) ? "\r\n" : "\n";
        const double u = rng.uniform();
        if (u < 0.05)
            text += "[Instrumental]";
        else if (u < 0.15)
            text += line() + " [x2]";
        else
            text += line();
    }
    return text;
}

std::int64_t year_start(int year)
{
    using namespace std::chrono;
    return sys_seconds(sys_days(std::chrono::year(year) / January / 1)).time_since_epoch().count();
}

Matrix project(const Matrix& z, const Matrix& a, double noise, Rng& rng, double scale)
{
    Matrix x = matmul(z, a);
    for (double& v : x.values())
        v = (v + noise * rng.normal()) * scale;
    return x;
}

} // namespace

std::size_t SynthConfig::audio_dim() const
{
    std::size_t d = 0;
    for (const auto& g : audio_groups)
        d += g.dim;
    return d;
}

void SynthConfig::validate() const
{
    if (n < 2)
        throw ConfigError("synth: n must be at least 2");
    if (audio_groups.empty())
        throw ConfigError("synth: at least one audio group is required");
    for (const auto& g : audio_groups)
        if (g.dim == 0 || g.bottleneck == 0 || g.bottleneck >= g.dim)
            throw ConfigError("synth: audio group '" + g.name + "' needs 0 < bottleneck < dim");
    if (lyrics_dim == 0 || social_dim == 0 || latent_dim == 0)
        throw ConfigError("synth: dimensions must be positive");
    for (double c : coefficients)
        if (!std::isfinite(c))
            throw ConfigError("synth: coefficients must be finite");
    if (!(target_noise >= 0.0) || !(feature_noise >= 0.0) || !(lyrics_scale > 0.0))
        throw ConfigError("synth: noise levels must be non-negative and the lyrics scale positive");
    if (users == 0)
        throw ConfigError("synth: users must be positive");
    if (min_release_year > max_release_year)
        throw ConfigError("synth: release year range is empty");
    if (languages.empty() || languages.size() != language_weights.size())
        throw ConfigError("synth: languages and weights must be non-empty and equal length");
    if (!(short_lyrics_fraction >= 0.0 && short_lyrics_fraction <= 1.0))
        throw ConfigError("synth: short lyrics fraction must be in [0, 1]");
    if (!(listeners_per_year > 0.0))
        throw ConfigError("synth: listeners_per_year must be positive");
    window.validate();
}

nlohmann::json SynthConfig::to_json() const
{
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : audio_groups)
        groups.push_back({{"name", g.name}, {"dim", g.dim}, {"bottleneck", g.bottleneck}});
    return {{"n", n},
            {"audio_groups", groups},
            {"lyrics_dim", lyrics_dim},
            {"social_dim", social_dim},
            {"latent_dim", latent_dim},
            {"coefficients", coefficients},
            {"target_noise", target_noise},
            {"feature_noise", feature_noise},
            {"lyrics_scale", lyrics_scale},
            {"seed", seed},
            {"artists", artists},
            {"users", users},
            {"min_release_year", min_release_year},
            {"max_release_year", max_release_year},
            {"languages", languages},
            {"language_weights", language_weights},
            {"short_lyrics_fraction", short_lyrics_fraction},
            {"events", events},
            {"window", {window.first_year, window.last_year}},
            {"listeners_per_year", listeners_per_year}};
}

namespace {

SynthConfig parse_synth(const nlohmann::json& j)
{
    for (const char* key : {"n", "lyrics_dim", "social_dim", "latent_dim", "seed", "artists", "users"})
        if (j.contains(key) && !(j.at(key).is_number_integer() && j.at(key).get<std::int64_t>() >= 0))
            throw ConfigError(std::string("synth: '") + key + "' must be a non-negative integer");
    SynthConfig c;
    if (j.contains("audio_groups")) {
        c.audio_groups.clear();
        for (const auto& g : j.at("audio_groups"))
            c.audio_groups.push_back(
                {g.at("name").get<std::string>(), g.at("dim").get<std::size_t>(), g.at("bottleneck").get<std::size_t>()});
    }
    c.n = j.value("n", c.n);
    c.lyrics_dim = j.value("lyrics_dim", c.lyrics_dim);
    c.social_dim = j.value("social_dim", c.social_dim);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    if (j.contains("coefficients"))
        c.coefficients = j.at("coefficients").get<std::array<double, 3>>();
    c.target_noise = j.value("target_noise", c.target_noise);
    c.feature_noise = j.value("feature_noise", c.feature_noise);
    c.lyrics_scale = j.value("lyrics_scale", c.lyrics_scale);
    c.seed = j.value("seed", c.seed);
    c.artists = j.value("artists", c.artists);
    c.users = j.value("users", c.users);
    c.min_release_year = j.value("min_release_year", c.min_release_year);
    c.max_release_year = j.value("max_release_year", c.max_release_year);
    c.languages = j.value("languages", c.languages);
    c.language_weights = j.value("language_weights", c.language_weights);
    c.short_lyrics_fraction = j.value("short_lyrics_fraction", c.short_lyrics_fraction);
    c.events = j.value("events", c.events);
    if (j.contains("window")) {
        const auto w = j.at("window").get<std::array<int, 2>>();
        c.window = {w[0], w[1]};
    }
    c.listeners_per_year = j.value("listeners_per_year", c.listeners_per_year);
    return c;
}

} // namespace

SynthConfig SynthConfig::from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ConfigError("synth config must be an object");
    SynthConfig c;
    try {
        c = parse_synth(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

SynthDataset synth_generate(const SynthConfig& cfg)
{
    cfg.validate();
    Rng root(cfg.seed);
    Rng latent_rng = root.fork();
    Rng mix_rng = root.fork();
    Rng noise_rng = root.fork();
    Rng meta_rng = root.fork();
    Rng event_rng = root.fork();

    const std::size_t n = cfg.n;
    const std::size_t k = cfg.latent_dim;
    SynthDataset ds;
    for (auto& z : ds.latents) {
        z = Matrix(n, k);
        for (double& v : z.values())
            v = latent_rng.normal();
    }

    std::array<std::vector<double>, 3> u;
    for (auto& v : u)
        v = unit_vector(mix_rng, k);
    const Matrix a_audio = mixing(mix_rng, k, cfg.audio_dim());
    const Matrix a_lyrics = mixing(mix_rng, k, cfg.lyrics_dim);
    const Matrix a_social = mixing(mix_rng, k, cfg.social_dim);

    ds.audio = project(ds.latents[0], a_audio, cfg.feature_noise, noise_rng, 1.0);
    ds.lyrics = project(ds.latents[1], a_lyrics, cfg.feature_noise, noise_rng, cfg.lyrics_scale);
    ds.social = project(ds.latents[2], a_social, cfg.feature_noise, noise_rng, 1.0);

    std::array<std::vector<double>, 3> g;
    for (std::size_t m = 0; m < 3; ++m) {
        g[m].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c)
                s += ds.latents[m](i, c) * u[m][c];
            g[m][i] = s;
        }
    }
    double var = cfg.target_noise * cfg.target_noise;
    for (double c : cfg.coefficients)
        var += c * c;
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;

    const std::size_t artists = cfg.artists ? cfg.artists : std::max<std::size_t>(1, n / 8);
    const std::size_t id_width = std::to_string(n).size() + 1;
    const std::size_t artist_width = std::to_string(artists).size() + 1;
    const double weight_total = std::accumulate(cfg.language_weights.begin(), cfg.language_weights.end(), 0.0);

    ds.y_star.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double y = cfg.target_noise * noise_rng.normal();
        for (std::size_t m = 0; m < 3; ++m)
            y += cfg.coefficients[m] * g[m][i];
        ds.y_star[i] = y;

        TrackRecord r;
        r.track_id = pad_id('T', i, id_width);
        r.artist_id = pad_id('A', meta_rng.index(artists), artist_width);
        r.release_year = cfg.min_release_year +
                         static_cast<int>(meta_rng.index(static_cast<std::size_t>(cfg.max_release_year - cfg.min_release_year + 1)));
        double pick = meta_rng.uniform() * weight_total;
        std::size_t lang = 0;
        while (lang + 1 < cfg.languages.size() && pick >= cfg.language_weights[lang]) {
            pick -= cfg.language_weights[lang];
            ++lang;
        }
        r.language = cfg.languages[lang];
        r.lyrics = make_lyrics(meta_rng, meta_rng.uniform() < cfg.short_lyrics_fraction);
        r.popularity = static_cast<int>(std::clamp<long long>(std::llround(50.0 + 15.0 * y / sd), 0, 100));
        ds.ids.push_back(r.track_id);
        ds.records.push_back(std::move(r));
    }

    if (cfg.events) {
        for (std::size_t i = 0; i < n; ++i) {
            const double e = g[2][i];
            const double lambda = cfg.listeners_per_year * std::exp(0.6 * e);
            const double repeat_p = 1.0 / (1.0 + std::exp(-e));
            std::size_t emitted = 0;
            for (int year = cfg.window.first_year; year <= cfg.window.last_year; ++year) {
                const std::int64_t start = year_start(year);
                const std::int64_t span = year_start(year + 1) - start;
                std::size_t listeners = poisson(event_rng, lambda);
                if (year == cfg.window.last_year && emitted == 0 && listeners == 0)
                    listeners = 1;
                for (std::size_t l = 0; l < listeners; ++l) {
                    const std::string user = pad_id('U', event_rng.index(cfg.users), 5);
                    std::size_t plays = 1;
                    while (plays < 20 && event_rng.uniform() < repeat_p * 0.7)
                        ++plays;
                    for (std::size_t p = 0; p < plays; ++p) {
                        const auto offset = static_cast<std::int64_t>(event_rng.index(static_cast<std::size_t>(span)));
                        ds.events.push_back({user, ds.ids[i], start + offset});
                        ++emitted;
                    }
                }
            }
        }
    }

    std::size_t col = 0;
    for (const auto& grp : cfg.audio_groups) {
        ds.audio_registry.groups.push_back({grp.name, col, col + grp.dim, grp.bottleneck});
        col += grp.dim;
    }
    return ds;
}

namespace {

csv::KeyedMatrix keyed(const std::vector<std::string>& ids, const Matrix& m, const std::string& prefix)
{
    csv::KeyedMatrix km;
    km.ids = ids;
    km.values = m;
    for (std::size_t c = 0; c < m.cols(); ++c)
        km.columns.push_back(prefix + std::to_string(c));
    return km;
}

} // namespace

void write_synth(const std::filesystem::path& dir, const SynthDataset& ds)
{
    std::filesystem::create_directories(dir);
    write_metadata(dir / "metadata.csv", ds.records);
    write_lyrics(dir / "lyrics.csv", ds.records);

    {
        std::ofstream out(dir / "events.csv", std::ios::binary);
        if (!out)
            throw InputError("cannot write " + (dir / "events.csv").string());
        out << "user_id,track_id,timestamp\n";
        for (const auto& e : ds.events)
            out << e.user_id << ',' << e.track_id << ',' << e.timestamp << '\n';
    }

    csv::write_keyed_matrix(dir / "audio_raw.csv", keyed(ds.ids, ds.audio, "a"));
    nn::write_json_file(dir / "audio_registry.json", ds.audio_registry.to_json());
    csv::write_keyed_matrix(dir / "lyrics_emb.csv", keyed(ds.ids, ds.lyrics, "e"));
    csv::write_keyed_matrix(dir / "social.csv", keyed(ds.ids, ds.social, "s"));

    const std::size_t k = ds.latents[0].cols();
    Matrix lat(ds.ids.size(), 3 * k + 1);
    csv::KeyedMatrix km;
    km.ids = ds.ids;
    for (const char* m : {"audio_z", "lyrics_z", "social_z"})
        for (std::size_t c = 0; c < k; ++c)
            km.columns.push_back(std::string(m) + std::to_string(c));
    km.columns.push_back("y_star");
    for (std::size_t i = 0; i < ds.ids.size(); ++i) {
        for (std::size_t m = 0; m < 3; ++m)
            for (std::size_t c = 0; c < k; ++c)
                lat(i, m * k + c) = ds.latents[m](i, c);
        lat(i, 3 * k) = ds.y_star[i];
    }
    km.values = std::move(lat);
    csv::write_keyed_matrix(dir / "latents.csv", km);
}

} // namespace gamenet::data
