#include "cli.hpp"

#include "gamenet/checkpoint.hpp"
#include "gamenet/csv.hpp"
#include "gamenet/ctd.hpp"
#include "gamenet/data.hpp"
#include "gamenet/error.hpp"
#include "gamenet/hash.hpp"
#include "gamenet/loss.hpp"
#include "gamenet/metrics.hpp"
#include "gamenet/model.hpp"
#include "gamenet/onion_ae.hpp"
#include "gamenet/scaler.hpp"
#include "gamenet/split.hpp"
#include "gamenet/synth.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <type_traits>
#include <ostream>
#include <thread>
#include <unordered_map>

namespace gamenet::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ---- config helpers --------------------------------------------------------

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
        if (!(j.at(key).is_number_integer() && j.at(key).get<std::int64_t>() >= 0))
            throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::string path_of(const json& sec, const char* key, const std::string& fallback)
{
    return get_or<std::string>(sec, key, fallback);
}

nn::TrainConfig parse_train(const json& j, nn::TrainConfig base, std::uint64_t seed)
{
    if (!j.is_null() && !j.is_object())
        throw ConfigError("training settings must be an object");
    nn::TrainConfig c = base;
    if (j.is_object()) {
        if (j.contains("optimizer"))
            c.optimizer.kind = nn::parse_optimizer_kind(get_or<std::string>(j, "optimizer", "adam"));
        c.optimizer.lr = get_or(j, "lr", c.optimizer.lr);
        c.optimizer.weight_decay = get_or(j, "weight_decay", c.optimizer.weight_decay);
        c.batch_size = get_or(j, "batch_size", c.batch_size);
        c.max_epochs = get_or(j, "max_epochs", c.max_epochs);
        c.patience = get_or(j, "patience", c.patience);
        c.clip_norm = get_or(j, "clip_norm", c.clip_norm);
        if (j.contains("plateau")) {
            const json& p = j.at("plateau");
            c.use_plateau = get_or(p, "enabled", c.use_plateau);
            c.plateau.factor = get_or(p, "factor", c.plateau.factor);
            c.plateau.patience = get_or(p, "patience", c.plateau.patience);
            c.plateau.min_lr = get_or(p, "min_lr", c.plateau.min_lr);
        }
    }
    c.seed = seed;
    c.validate();
    return c;
}

json history_summary(const nn::TrainHistory& h)
{
    return {{"epochs", h.train_loss.size()},
            {"best_epoch", h.best_epoch},
            {"best_val", h.best_val},
            {"stopped_early", h.stopped_early},
            {"val_loss", h.val_loss},
            {"learning_rate", h.learning_rate}};
}

// ---- manifests -------------------------------------------------------------

class Manifest {
public:
    Manifest(const RunContext& ctx, std::string sub) : ctx_(ctx), sub_(std::move(sub)) {}

    void input(const std::string& rel)
    {
        const fs::path p = ctx_.path(rel);
        if (!fs::exists(p))
            throw InputError("missing input: " + p.string());
        if (fs::is_directory(p)) {
            for (const auto& f : sorted_files(p))
                inputs_[rel + "/" + f] = sha256_file(p / f);
        } else {
            inputs_[rel] = sha256_file(p);
        }
    }

    void output(const std::string& rel)
    {
        const fs::path p = ctx_.path(rel);
        if (fs::is_directory(p)) {
            for (const auto& f : sorted_files(p))
                outputs_[rel + "/" + f] = sha256_file(p / f);
        } else {
            outputs_[rel] = sha256_file(p);
        }
    }

    json& stats() { return stats_; }

    void write(double wall_seconds) const
    {
        json m = {{"subcommand", sub_},
                  {"tool_version", kToolVersion},
                  {"config_sha256", sha256_hex(ctx_.config.dump())},
                  {"seed", ctx_.seed},
                  {"inputs", inputs_},
                  {"outputs", outputs_},
                  {"stats", stats_}};
        nn::write_json_file(ctx_.path("manifests/" + sub_ + ".json"), m);
        nn::write_json_file(ctx_.path("manifests/" + sub_ + ".timing.json"),
                            {{"subcommand", sub_}, {"wall_seconds", wall_seconds}, {"threads", ctx_.threads}});
    }

private:
    static std::vector<std::string> sorted_files(const fs::path& dir)
    {
        std::vector<std::string> out;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file())
                out.push_back(e.path().filename().string());
        std::sort(out.begin(), out.end());
        return out;
    }

    const RunContext& ctx_;
    std::string sub_;
    json inputs_ = json::object();
    json outputs_ = json::object();
    json stats_ = json::object();
};

// ---- shared data loading ---------------------------------------------------

struct Joined {
    std::vector<std::string> ids;
    std::vector<int> years;
    std::vector<double> popularity;
    std::vector<data::SplitLabel> label;
    ModalityInputs x;
    std::size_t dropped = 0;

    std::vector<std::size_t> rows(const std::string& which) const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (which == "all" || data::to_string(label[i]) == which)
                out.push_back(i);
        return out;
    }
};

struct ModelPaths {
    std::string metadata;
    std::string split;
    std::array<std::string, kModalityCount> features;
};

ModelPaths model_paths(const json& sec)
{
    ModelPaths p;
    p.metadata = path_of(sec, "metadata", "clean/metadata.csv");
    p.split = path_of(sec, "split", "split/split.csv");
    const json f = sec.value("features", json::object());
    p.features = {path_of(f, "audio", "features/audio.csv"), path_of(f, "lyrics", "raw/lyrics_emb.csv"),
                  path_of(f, "social", "features/ctd.csv")};
    return p;
}

Joined load_joined(const RunContext& ctx, const ModelPaths& paths, Manifest& man)
{
    man.input(paths.metadata);
    man.input(paths.split);
    for (const auto& f : paths.features)
        man.input(f);

    const auto records = data::read_tracks(ctx.path(paths.metadata));
    const auto split = data::read_split(ctx.path(paths.split));
    std::unordered_map<std::string, data::SplitLabel> label;
    for (std::size_t i = 0; i < split.ids.size(); ++i)
        label[split.ids[i]] = split.label[i];

    std::array<csv::KeyedMatrix, kModalityCount> feats;
    std::array<std::unordered_map<std::string, std::size_t>, kModalityCount> index_of;
    for (std::size_t m = 0; m < kModalityCount; ++m) {
        feats[m] = csv::read_keyed_matrix(ctx.path(paths.features[m]));
        for (std::size_t r = 0; r < feats[m].ids.size(); ++r)
            index_of[m][feats[m].ids[r]] = r;
    }

    Joined j;
    std::array<std::vector<std::size_t>, kModalityCount> take;
    for (const auto& rec : records) {
        auto l = label.find(rec.track_id);
        bool ok = l != label.end();
        std::array<std::size_t, kModalityCount> at{};
        for (std::size_t m = 0; ok && m < kModalityCount; ++m) {
            auto it = index_of[m].find(rec.track_id);
            ok = it != index_of[m].end();
            if (ok)
                at[m] = it->second;
        }
        if (!ok) {
            ++j.dropped;
            continue;
        }
        j.ids.push_back(rec.track_id);
        j.years.push_back(rec.release_year);
        j.popularity.push_back(rec.popularity);
        j.label.push_back(l->second);
        for (std::size_t m = 0; m < kModalityCount; ++m)
            take[m].push_back(at[m]);
    }
    if (j.ids.empty())
        throw DataError("no track has metadata, a split label and all three feature sets");
    for (std::size_t m = 0; m < kModalityCount; ++m)
        j.x[m] = select_rows(feats[m].values, take[m]);
    return j;
}

data::ScalerParams target_scaler() { return data::ScalerParams::fixed_range(1, 0.0, 100.0); }

Matrix target_matrix(const Joined& j, std::span<const std::size_t> rows)
{
    Matrix y(rows.size(), 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
        y(i, 0) = j.popularity[rows[i]];
    return target_scaler().apply(y);
}

MultimodalData make_data(const Joined& j, std::span<const std::size_t> rows,
                         const std::array<data::ScalerParams, kModalityCount>& scalers)
{
    MultimodalData d;
    for (std::size_t r : rows)
        d.ids.push_back(j.ids[r]);
    for (std::size_t m = 0; m < kModalityCount; ++m)
        d.x[m] = scalers[m].apply(select_rows(j.x[m], rows));
    d.y = target_matrix(j, rows);
    return d;
}

/// Train rows split into fit / validation subsets (stratified on popularity).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> fit_val_rows(const Joined& j, double val_fraction,
                                                                           std::uint64_t seed)
{
    const auto train = j.rows("train");
    std::vector<double> pop;
    for (std::size_t r : train)
        pop.push_back(j.popularity[r]);
    data::SplitConfig sc;
    sc.test_fraction = val_fraction;
    sc.seed = seed;
    const auto a = data::stratified_split(pop, sc);
    std::vector<std::size_t> fit, val;
    for (std::size_t i = 0; i < train.size(); ++i)
        (a.label[i] == data::SplitLabel::Test ? val : fit).push_back(train[i]);
    return {fit, val};
}

json scalers_json(const std::array<data::ScalerParams, kModalityCount>& s)
{
    json j = json::object();
    for (Modality m : kModalities)
        j[to_string(m)] = s[index(m)].to_json();
    return j;
}

std::array<data::ScalerParams, kModalityCount> scalers_from_json(const json& j)
{
    std::array<data::ScalerParams, kModalityCount> s;
    for (Modality m : kModalities)
        s[index(m)] = data::ScalerParams::from_json(j.at(to_string(m)));
    return s;
}

ModelConfig model_config(const json& sec, const ModalityInputs& x)
{
    ModelConfig cfg = ModelConfig::defaults(x[0].cols(), x[1].cols(), x[2].cols());
    const json branches = sec.value("branches", json::object());
    for (Modality m : kModalities) {
        auto& b = cfg.branches[index(m)];
        if (!branches.contains(to_string(m)))
            continue;
        const json& o = branches.at(to_string(m));
        b.hidden = get_or(o, "hidden", b.hidden);
        b.dropout = get_or(o, "dropout", b.dropout);
        b.batchnorm = get_or(o, "batchnorm", b.batchnorm);
        if (o.contains("activation"))
            b.activation = nn::activation_from_json(o.at("activation"));
    }
    if (sec.contains("gate")) {
        const json& g = sec.at("gate");
        cfg.gate.hidden = get_or(g, "hidden", cfg.gate.hidden);
        cfg.gate.dropout = get_or(g, "dropout", cfg.gate.dropout);
        cfg.gate.batchnorm = get_or(g, "batchnorm", cfg.gate.batchnorm);
        cfg.gate.eps = get_or(g, "eps", cfg.gate.eps);
        cfg.gate.zero_init_output = get_or(g, "zero_init_output", cfg.gate.zero_init_output);
        if (g.contains("activation"))
            cfg.gate.activation = nn::activation_from_json(g.at("activation"));
    }
    cfg.validate();
    return cfg;
}

void check_dims(const GameNet& model, const ModalityInputs& x)
{
    for (Modality m : kModalities)
        if (x[index(m)].cols() != model.config().branches[index(m)].input_dim)
            throw ShapeError(to_string(m) + " features have " + std::to_string(x[index(m)].cols()) +
                             " columns; the model expects " +
                             std::to_string(model.config().branches[index(m)].input_dim));
}

json val_metrics(const Matrix& y, const Matrix& yhat)
{
    return eval::compute_metrics(y.values(), yhat.values()).to_json();
}

// ---- subcommands -----------------------------------------------------------

void cmd_synth(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("synth");
    json body = sec;
    body.erase("output_dir");
    data::SynthConfig cfg = data::SynthConfig::from_json(body);
    cfg.seed = ctx.seed;
    const std::string out = path_of(sec, "output_dir", "raw");
    const auto ds = data::synth_generate(cfg);
    data::write_synth(ctx.path(out), ds);
    man.output(out);
    man.stats() = {{"tracks", ds.ids.size()}, {"events", ds.events.size()}, {"audio_dim", cfg.audio_dim()}};
    log << "synth: " << ds.ids.size() << " tracks, " << ds.events.size() << " events -> " << out << "\n";
}

void cmd_clean(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("clean");
    const std::string meta = path_of(sec, "metadata", "raw/metadata.csv");
    const std::string lyr = path_of(sec, "lyrics", "raw/lyrics.csv");
    const std::string out = path_of(sec, "output_dir", "clean");
    man.input(meta);
    man.input(lyr);

    data::CleaningConfig cfg;
    cfg.min_year = get_or(sec, "min_year", cfg.min_year);
    cfg.languages = get_or(sec, "languages", cfg.languages);
    if (sec.contains("min_lyrics_chars"))
        cfg.min_lyrics_chars = get_or<std::size_t>(sec, "min_lyrics_chars", 0);
    if (sec.contains("max_lyrics_chars"))
        cfg.max_lyrics_chars = get_or<std::size_t>(sec, "max_lyrics_chars", 0);
    data::LyricsConfig lcfg;
    if (sec.contains("annotations")) {
        lcfg.annotations.clear();
        for (auto a : get_or<std::vector<std::string>>(sec, "annotations", {})) {
            std::transform(a.begin(), a.end(), a.begin(), [](unsigned char c) { return std::tolower(c); });
            lcfg.annotations.insert(a);
        }
    }

    auto records = data::read_tracks(ctx.path(meta), ctx.path(lyr));
    for (auto& r : records)
        r.lyrics = data::normalize_lyrics(r.lyrics, lcfg);
    const auto res = data::clean(records, cfg);
    data::write_metadata(ctx.path(out + "/metadata.csv"), res.kept);
    data::write_lyrics(ctx.path(out + "/lyrics.csv"), res.kept);
    man.output(out);
    man.stats() = {{"input", records.size()}, {"kept", res.kept.size()}, {"rejected", res.rejected}};
    log << "clean: kept " << res.kept.size() << " of " << records.size() << "\n";
}

void cmd_split(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("split");
    const std::string meta = path_of(sec, "metadata", "clean/metadata.csv");
    const std::string out = path_of(sec, "output", "split/split.csv");
    man.input(meta);
    data::SplitConfig cfg;
    cfg.bins = get_or(sec, "bins", cfg.bins);
    cfg.test_fraction = get_or(sec, "test_fraction", cfg.test_fraction);
    cfg.seed = get_or(sec, "seed", cfg.seed);

    const auto records = data::read_tracks(ctx.path(meta));
    std::vector<double> pop;
    std::vector<std::string> ids;
    for (const auto& r : records) {
        pop.push_back(r.popularity);
        ids.push_back(r.track_id);
    }
    const auto a = data::stratified_split(pop, cfg);
    data::write_split(ctx.path(out), ids, a);
    man.output(out);
    json bins = json::array();
    for (std::size_t b = 0; b < cfg.bins; ++b) {
        std::size_t n = 0, t = 0;
        for (std::size_t i = 0; i < a.bin.size(); ++i)
            if (a.bin[i] == b) {
                ++n;
                t += a.label[i] == data::SplitLabel::Test;
            }
        bins.push_back({{"rows", n}, {"test", t}});
    }
    man.stats() = {{"rows", ids.size()}, {"edges", a.edges}, {"bins", bins}, {"split_seed", cfg.seed}};
    log << "split: " << a.rows(data::SplitLabel::Test).size() << " test rows of " << ids.size() << "\n";
}

void cmd_ctd(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("ctd");
    const std::string events = path_of(sec, "events", "raw/events.csv");
    const std::string meta = path_of(sec, "metadata", "clean/metadata.csv");
    const std::string out = path_of(sec, "output", "features/ctd.csv");
    const std::string schema_out = path_of(sec, "schema_output", "features/ctd_schema.json");
    man.input(events);
    man.input(meta);

    ctd::YearWindow window;
    if (sec.contains("window")) {
        const auto w = get_or<std::vector<int>>(sec, "window", {});
        if (w.size() != 2)
            throw ConfigError("ctd.window must be [first_year, last_year]");
        window = {w[0], w[1]};
    }
    window.validate();
    const ctd::Schema schema = ctd::Schema::make(ctd::parse_mode(get_or<std::string>(sec, "mode", "aggregate")), window);

    std::map<std::string, std::string> track_artist;
    for (const auto& r : data::read_tracks(ctx.path(meta)))
        track_artist[r.track_id] = r.artist_id;
    const auto ingest = ctd::ingest_events(ctx.path(events), window);
    const auto ds = ctd::build_dataset(ingest.counts, track_artist, schema);

    csv::KeyedMatrix km;
    km.ids = ds.track_ids;
    km.columns = ds.schema.names;
    km.values = ds.features;
    csv::write_keyed_matrix(ctx.path(out), km);
    nn::write_json_file(ctx.path(schema_out), ds.schema.to_json());
    man.output(out);
    man.output(schema_out);
    man.stats() = {{"rows", ingest.stats.rows},
                   {"accepted", ingest.stats.accepted},
                   {"malformed", ingest.stats.malformed},
                   {"out_of_window", ingest.stats.out_of_window},
                   {"tracks", ds.track_ids.size()},
                   {"features", ds.schema.names.size()}};
    log << "ctd-extract: " << ds.track_ids.size() << " tracks x " << ds.schema.names.size() << " features\n";
}

void cmd_ae_train(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("autoencoder");
    const std::string raw = path_of(sec, "raw", "raw/audio_raw.csv");
    const std::string reg_path = path_of(sec, "registry", "raw/audio_registry.json");
    const std::string split = path_of(sec, "split", "split/split.csv");
    const std::string out = path_of(sec, "output_dir", "models/ae");
    man.input(raw);
    man.input(split);

    ae::GroupRegistry registry;
    if (reg_path == "default") {
        registry = ae::default_registry();
    } else {
        man.input(reg_path);
        registry = ae::GroupRegistry::from_json(nn::read_json_file(ctx.path(reg_path)));
    }

    ae::AETrainConfig cfg;
    cfg.train = parse_train(sec.value("train", json()), cfg.train, ctx.seed);
    cfg.val_fraction = get_or(sec, "val_fraction", cfg.val_fraction);
    cfg.layers.dropout = get_or(sec, "dropout", cfg.layers.dropout);
    cfg.layers.batchnorm = get_or(sec, "batchnorm", cfg.layers.batchnorm);

    const auto km = csv::read_keyed_matrix(ctx.path(raw));
    registry.validate(km.values.cols());
    const auto sp = data::read_split(ctx.path(split));
    std::unordered_map<std::string, data::SplitLabel> label;
    for (std::size_t i = 0; i < sp.ids.size(); ++i)
        label[sp.ids[i]] = sp.label[i];
    std::vector<std::size_t> train_rows;
    for (std::size_t r = 0; r < km.ids.size(); ++r)
        if (auto it = label.find(km.ids[r]); it != label.end() && it->second == data::SplitLabel::Train)
            train_rows.push_back(r);
    if (train_rows.empty())
        throw DataError("ae-train: no training rows found in " + raw);

    const auto ensemble = ae::train_ensemble(registry, select_rows(km.values, train_rows), cfg, ctx.threads);
    ae::save_ensemble(ctx.path(out), ensemble);
    man.output(out);
    json groups = json::object();
    for (const auto& g : ensemble.groups())
        groups[g.group.name] = {{"val_relmse", g.val_relmse},
                                {"bottleneck", g.group.bottleneck},
                                {"epochs", g.history.train_loss.size()}};
    man.stats() = {{"train_rows", train_rows.size()}, {"output_dim", ensemble.output_dim()}, {"groups", groups}};
    log << "ae-train: " << ensemble.groups().size() << " groups, output dim " << ensemble.output_dim() << "\n";
}

void cmd_compress(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("compress");
    const std::string raw = path_of(sec, "raw", "raw/audio_raw.csv");
    const std::string model = path_of(sec, "model_dir", "models/ae");
    const std::string out = path_of(sec, "output", "features/audio.csv");
    man.input(raw);
    man.input(model);
    if (!fs::exists(ctx.path(model) / "manifest.json"))
        throw InputError("autoencoder ensemble not found in " + ctx.path(model).string());
    const auto ensemble = ae::load_ensemble(ctx.path(model));
    const auto km = csv::read_keyed_matrix(ctx.path(raw));
    csv::KeyedMatrix z;
    z.ids = km.ids;
    z.columns = ensemble.output_names();
    z.values = ensemble.compress(km.values);
    csv::write_keyed_matrix(ctx.path(out), z);
    man.output(out);
    man.stats() = {{"rows", z.ids.size()}, {"output_dim", z.columns.size()}};
    log << "compress: " << z.ids.size() << " rows -> " << z.columns.size() << " dims\n";
}

struct ModelSettings {
    ModelPaths paths;
    double val_fraction = 0.1;
    std::string phase1_dir;
    std::string phase2_dir;
};

ModelSettings model_settings(const json& sec)
{
    ModelSettings s;
    s.paths = model_paths(sec);
    s.val_fraction = get_or(sec, "val_fraction", s.val_fraction);
    s.phase1_dir = path_of(sec, "phase1_dir", "models/phase1");
    s.phase2_dir = path_of(sec, "phase2_dir", "models/phase2");
    return s;
}

void cmd_phase1(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("model");
    const ModelSettings ms = model_settings(sec);
    const Joined j = load_joined(ctx, ms.paths, man);
    const auto [fit_rows, val_rows] = fit_val_rows(j, ms.val_fraction, ctx.seed);

    const json sj = sec.value("scalers", json::object());
    std::array<data::ScalerParams, kModalityCount> scalers;
    for (Modality m : kModalities) {
        const json o = sj.value(to_string(m), json::object());
        const std::string def = m == Modality::Lyrics ? "constant" : "zscore";
        const auto kind = data::parse_scaler_kind(get_or<std::string>(o, "kind", def));
        scalers[index(m)] = data::ScalerParams::fit(select_rows(j.x[index(m)], fit_rows), kind,
                                                    get_or(o, "factor", 100.0));
    }
    const MultimodalData train = make_data(j, fit_rows, scalers);
    const MultimodalData val = make_data(j, val_rows, scalers);

    GameNet model(model_config(sec, j.x), ctx.seed);
    std::array<nn::TrainHistory, kModalityCount> hist;
    std::array<std::exception_ptr, kModalityCount> errors;
    auto work = [&](std::size_t i) {
        try {
            const auto cfg = parse_train(sec.value("phase1", json()), phase1_defaults(), ctx.seed + 1 + i);
            hist[i] = phase1_train(model, kModalities[i], train, val, cfg);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (ctx.threads > 1) {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < kModalityCount; ++i)
            pool.emplace_back(work, i);
    } else {
        for (std::size_t i = 0; i < kModalityCount; ++i)
            work(i);
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    json report = json::object();
    for (Modality m : kModalities) {
        const Matrix yhat = model.branch(m).infer(val.x[index(m)]).yhat;
        report[to_string(m)] = {{"val", val_metrics(val.y, yhat)}, {"history", history_summary(hist[index(m)])}};
    }
    save_model(ctx.path(ms.phase1_dir), model, {{"scalers", scalers_json(scalers)}});
    const std::string report_path = path_of(sec, "phase1_report", "reports/phase1.json");
    nn::write_json_file(ctx.path(report_path), report);
    man.output(ms.phase1_dir);
    man.output(report_path);
    json summary = json::object();
    for (Modality m : kModalities)
        summary[to_string(m)] = report[to_string(m)]["val"];
    man.stats() = {{"train_rows", fit_rows.size()}, {"val_rows", val_rows.size()}, {"dropped", j.dropped},
                   {"val", summary}};
    log << "train-phase1: " << fit_rows.size() << " train / " << val_rows.size() << " val rows\n";
}

void cmd_phase2(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("model");
    const ModelSettings ms = model_settings(sec);
    man.input(ms.phase1_dir);
    auto loaded = load_model(ctx.path(ms.phase1_dir));
    GameNet& model = loaded.model;
    const auto scalers = scalers_from_json(loaded.extra.at("scalers"));
    const Joined j = load_joined(ctx, ms.paths, man);
    check_dims(model, j.x);
    const auto [fit_rows, val_rows] = fit_val_rows(j, ms.val_fraction, ctx.seed);
    const MultimodalData train = make_data(j, fit_rows, scalers);
    const MultimodalData val = make_data(j, val_rows, scalers);

    Phase2Config cfg;
    const json p2 = sec.value("phase2", json::object());
    cfg.train = parse_train(p2, cfg.train, ctx.seed + 10);
    cfg.weights.final_weight = get_or(p2, "final_weight", cfg.weights.final_weight);
    cfg.weights.individual_weight = get_or(p2, "individual_weight", cfg.weights.individual_weight);
    cfg.finetune_branches = get_or(p2, "finetune_branches", cfg.finetune_branches);
    cfg.social_weight_decay = get_or(p2, "social_weight_decay", cfg.social_weight_decay);

    const double before = nn::mse_loss(model.predict(val.x).yhat, val.y).value;
    const auto hist = phase2_train(model, train, val, cfg);
    const Prediction p = model.predict(val.x);
    const GateReport gr = summarize_alpha(p.alpha);

    save_model(ctx.path(ms.phase2_dir), model, loaded.extra);
    const std::string report_path = path_of(sec, "phase2_report", "reports/phase2.json");
    json report = {{"val", val_metrics(val.y, p.yhat)},
                   {"val_mse_before", before},
                   {"gate_mean", {{"audio", gr.mean[0]}, {"lyrics", gr.mean[1]}, {"social", gr.mean[2]}}},
                   {"history", history_summary(hist)}};
    nn::write_json_file(ctx.path(report_path), report);
    man.output(ms.phase2_dir);
    man.output(report_path);
    man.stats() = {{"train_rows", fit_rows.size()}, {"val_rows", val_rows.size()}, {"val", report["val"]}};
    log << "train-phase2: val mse " << before << " -> " << hist.best_val << "\n";
}

std::string which_split(const json& sec)
{
    const std::string s = get_or<std::string>(sec, "split", "test");
    if (s != "test" && s != "train" && s != "all")
        throw ConfigError("split selector must be test, train or all");
    return s;
}

void cmd_predict(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json msec = ctx.section("model");
    const json sec = ctx.section("predict");
    const ModelSettings ms = model_settings(msec);
    const std::string dir = path_of(sec, "model_dir", ms.phase2_dir);
    const std::string out = path_of(sec, "output", "predictions/test.csv");
    man.input(dir);
    const auto loaded = load_model(ctx.path(dir));
    const auto scalers = scalers_from_json(loaded.extra.at("scalers"));
    const Joined j = load_joined(ctx, ms.paths, man);
    check_dims(loaded.model, j.x);
    const auto rows = j.rows(which_split(sec));
    if (rows.empty())
        throw DataError("predict: no rows in the selected split");
    const MultimodalData d = make_data(j, rows, scalers);
    const Prediction p = loaded.model.predict(d.x);
    const Matrix y100 = target_scaler().inverse(d.y);
    const Matrix yhat100 = target_scaler().inverse(p.yhat);

    csv::Table t;
    t.header = {"track_id",     "year",         "split",         "y_true",       "y_pred",      "y_true_scaled",
                "y_pred_scaled", "alpha_audio", "alpha_lyrics", "alpha_social", "yhat_audio", "yhat_lyrics",
                "yhat_social"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> row{j.ids[rows[i]], std::to_string(j.years[rows[i]]),
                                     data::to_string(j.label[rows[i]]), csv::format_double(y100(i, 0)),
                                     csv::format_double(yhat100(i, 0)), csv::format_double(d.y(i, 0)),
                                     csv::format_double(p.yhat(i, 0))};
        for (std::size_t k = 0; k < kModalityCount; ++k)
            row.push_back(csv::format_double(p.alpha(i, k)));
        for (std::size_t k = 0; k < kModalityCount; ++k)
            row.push_back(csv::format_double(p.branch_yhat(i, k)));
        t.rows.push_back(std::move(row));
    }
    csv::write_table(ctx.path(out), t);
    man.output(out);
    man.stats() = {{"rows", rows.size()}, {"split", which_split(sec)}};
    log << "predict: " << rows.size() << " rows -> " << out << "\n";
}

void cmd_evaluate(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json sec = ctx.section("evaluate");
    const std::string in = path_of(sec, "predictions", "predictions/test.csv");
    const std::string out = path_of(sec, "output", "reports/metrics.json");
    man.input(in);
    const csv::Table t = csv::read_table(ctx.path(in));
    const std::size_t c_true = t.column("y_true");
    const std::size_t c_pred = t.column("y_pred");
    std::vector<double> y, yhat, ys, yhats;
    std::vector<int> years;
    const auto c_year = t.find_column("year");
    const auto c_ts = t.find_column("y_true_scaled");
    const auto c_ps = t.find_column("y_pred_scaled");
    std::array<std::optional<std::size_t>, 3> c_alpha{t.find_column("alpha_audio"), t.find_column("alpha_lyrics"),
                                                      t.find_column("alpha_social")};
    const bool has_alpha = c_year && c_alpha[0] && c_alpha[1] && c_alpha[2];
    Matrix alpha(has_alpha ? t.rows.size() : 0, 3);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        y.push_back(csv::parse_double(r[c_true]));
        yhat.push_back(csv::parse_double(r[c_pred]));
        ys.push_back(c_ts ? csv::parse_double(r[*c_ts]) : y.back() / 100.0);
        yhats.push_back(c_ps ? csv::parse_double(r[*c_ps]) : yhat.back() / 100.0);
        if (has_alpha) {
            years.push_back(static_cast<int>(csv::parse_int(r[*c_year])));
            for (std::size_t k = 0; k < 3; ++k)
                alpha(i, k) = csv::parse_double(r[*c_alpha[k]]);
        }
    }
    const auto unscaled = eval::compute_metrics(y, yhat);
    const auto scaled = eval::compute_metrics(ys, yhats);
    const auto ea = eval::error_analysis(y, yhat, years, has_alpha ? &alpha : nullptr);
    const json report = {{"unscaled", unscaled.to_json()}, {"scaled", scaled.to_json()}, {"error_analysis", ea.to_json()}};
    nn::write_json_file(ctx.path(out), report);
    man.output(out);
    man.stats() = {{"rows", y.size()}, {"r2", report["scaled"]["r2"]}, {"mae_scaled", scaled.mae}};
    log << "evaluate: n=" << y.size() << " mae(0-100)=" << unscaled.mae << "\n";
}

void cmd_gate_report(const RunContext& ctx, Manifest& man, std::ostream& log)
{
    const json msec = ctx.section("model");
    const json sec = ctx.section("gate_report");
    const ModelSettings ms = model_settings(msec);
    const std::string dir = path_of(sec, "model_dir", ms.phase2_dir);
    const std::string out = path_of(sec, "output", "reports/gate.json");
    man.input(dir);
    const auto loaded = load_model(ctx.path(dir));
    const auto scalers = scalers_from_json(loaded.extra.at("scalers"));
    const Joined j = load_joined(ctx, ms.paths, man);
    check_dims(loaded.model, j.x);
    const auto rows = j.rows(which_split(sec));
    if (rows.empty())
        throw DataError("gate-report: no rows in the selected split");
    const MultimodalData d = make_data(j, rows, scalers);
    std::vector<std::string> decades;
    for (std::size_t r : rows)
        decades.push_back(std::to_string(j.years[r] / 10 * 10) + "s");
    const GateReport gr = gate_report(loaded.model, d.x, &decades);

    auto triple = [](const std::array<double, kModalityCount>& a) {
        return json{{"audio", a[0]}, {"lyrics", a[1]}, {"social", a[2]}};
    };
    json by = json::object();
    for (const auto& [k, v] : gr.group_mean)
        by[k] = {{"mean", triple(v)}, {"n", gr.group_count.at(k)}};
    const json report = {{"n", rows.size()}, {"mean", triple(gr.mean)}, {"by_decade", by}};
    nn::write_json_file(ctx.path(out), report);
    man.output(out);
    man.stats() = {{"rows", rows.size()}, {"mean", triple(gr.mean)}};
    log << "gate-report: mean alpha audio=" << gr.mean[0] << " lyrics=" << gr.mean[1] << " social=" << gr.mean[2]
        << "\n";
}

using Handler = std::function<void(const RunContext&, Manifest&, std::ostream&)>;

const std::map<std::string, Handler>& handlers()
{
    static const std::map<std::string, Handler> h = {
        {"synth", cmd_synth},           {"clean", cmd_clean},         {"split", cmd_split},
        {"ctd-extract", cmd_ctd},       {"ae-train", cmd_ae_train},   {"compress", cmd_compress},
        {"train-phase1", cmd_phase1},   {"train-phase2", cmd_phase2}, {"predict", cmd_predict},
        {"evaluate", cmd_evaluate},     {"gate-report", cmd_gate_report},
    };
    return h;
}

} // namespace

const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> names = {"synth",        "clean",        "split",   "ctd-extract",
                                                   "ae-train",     "compress",     "train-phase1",
                                                   "train-phase2", "predict",      "evaluate", "gate-report"};
    return names;
}

json RunContext::section(const std::string& name) const
{
    if (!config.contains(name))
        return json::object();
    const json& s = config.at(name);
    if (!s.is_object())
        throw ConfigError("config section '" + name + "' must be an object");
    return s;
}

RunContext load_context(const RunOptions& opts)
{
    RunContext ctx;
    if (opts.config.empty())
        throw ConfigError("--config is required");
    std::ifstream in(opts.config, std::ios::binary);
    if (!in)
        throw InputError("cannot read config " + opts.config.string());
    try {
        ctx.config = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + opts.config.string() + ": " + e.what());
    }
    if (!ctx.config.is_object())
        throw ConfigError("config must be a JSON object");
    ctx.seed = opts.seed ? *opts.seed : get_or<std::uint64_t>(ctx.config, "seed", 46);
    ctx.config["seed"] = ctx.seed;
    ctx.workspace = opts.workspace;
    ctx.threads = std::max<std::size_t>(1, opts.threads);
    return ctx;
}

void run_subcommand(const std::string& name, const RunContext& ctx, std::ostream& log)
{
    const auto& h = handlers();
    auto it = h.find(name);
    if (it == h.end())
        throw ConfigError("unknown subcommand '" + name + "'");
    const auto start = std::chrono::steady_clock::now();
    Manifest man(ctx, name);
    try {
        it->second(ctx, man, log);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed JSON content: ") + e.what());
    }
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    man.write(wall.count());
}

int exit_code_for(std::exception_ptr e)
{
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return kUsage;
    } catch (const InputError&) {
        return kMissingInput;
    } catch (const ShapeError&) {
        return kDimensionMismatch;
    } catch (const DataError&) {
        return kDataError;
    } catch (const NumericError&) {
        return kNumericError;
    } catch (const StateError&) {
        return kStateError;
    } catch (...) {
        return kFailure;
    }
}

} // namespace gamenet::cli
