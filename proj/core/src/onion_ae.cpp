#include "gamenet/onion_ae.hpp"

#include "gamenet/checkpoint.hpp"
#include "gamenet/error.hpp"
#include "gamenet/hash.hpp"
#include "gamenet/loss.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace gamenet::ae {
namespace {

using nn::DenseLayerSpec;
using nn::Mode;

std::uint64_t group_seed(std::uint64_t base, const std::string& name)
{
    const std::string h = sha256_hex(name);
    return base ^ std::stoull(h.substr(0, 16), nullptr, 16);
}

std::vector<std::size_t> layer_dims(const nn::DenseStack& s)
{
    std::vector<std::size_t> out;
    for (const auto& spec : s.specs())
        out.push_back(spec.out_dim);
    return out;
}

} // namespace

void GroupRegistry::validate(std::size_t raw_cols) const
{
    if (groups.empty())
        throw ConfigError("feature group registry is empty");
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const auto& g : groups) {
        if (g.end <= g.begin)
            throw ConfigError("group '" + g.name + "': empty column range");
        if (g.bottleneck == 0 || g.bottleneck >= g.input_dim())
            throw ConfigError("group '" + g.name + "': bottleneck must be in [1, input dim)");
        if (raw_cols > 0 && g.end > raw_cols)
            throw ShapeError("group '" + g.name + "': columns [" + std::to_string(g.begin) + ", " +
                             std::to_string(g.end) + ") exceed the " + std::to_string(raw_cols) +
                             " raw columns");
        ranges.emplace_back(g.begin, g.end);
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i)
        if (ranges[i].first < ranges[i - 1].second)
            throw ConfigError("feature group column ranges overlap");
}

std::size_t GroupRegistry::total_bottleneck() const
{
    std::size_t n = 0;
    for (const auto& g : groups)
        n += g.bottleneck;
    return n;
}

std::size_t GroupRegistry::total_input() const
{
    std::size_t n = 0;
    for (const auto& g : groups)
        n += g.input_dim();
    return n;
}

nlohmann::json GroupRegistry::to_json() const
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& g : groups)
        arr.push_back({{"name", g.name}, {"columns", {g.begin, g.end}}, {"bottleneck", g.bottleneck}});
    return nlohmann::json{{"groups", arr}};
}

GroupRegistry GroupRegistry::from_json(const nlohmann::json& j)
{
    GroupRegistry r;
    try {
        for (const auto& gj : j.at("groups")) {
            FeatureGroup g;
            g.name = gj.at("name").get<std::string>();
            const auto cols = gj.at("columns").get<std::vector<std::size_t>>();
            if (cols.size() != 2)
                throw ConfigError("group '" + g.name + "': columns must be [begin, end)");
            g.begin = cols[0];
            g.end = cols[1];
            g.bottleneck = gj.at("bottleneck").get<std::size_t>();
            r.groups.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed group registry: ") + e.what());
    }
    r.validate();
    return r;
}

GroupRegistry default_registry()
{
    const std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> spec = {
        {"small_combined", {439, 128}},
        {"bow_emobase_chroma", {1000, 192}},
        {"blf", {4478, 510}},
        {"essentia", {1034, 256}},
        {"compare_audio_spectral", {2800, 448}},
        {"compare_mfcc", {1400, 384}},
        {"compare_pcm", {1700, 434}},
    };
    GroupRegistry r;
    std::size_t col = 0;
    for (const auto& [name, dims] : spec) {
        r.groups.push_back({name, col, col + dims.first, dims.second});
        col += dims.first;
    }
    return r;
}

std::vector<std::size_t> plan_architecture(std::size_t d)
{
    if (d < 2)
        throw ConfigError("plan_architecture: input dim must be >= 2");
    if (d > 4000)
        return {d / 2, d / 3, d / 5};
    if (d >= 2000)
        return {d / 2, d / 4};
    return {d / 2};
}

double lambda_for(std::size_t bottleneck)
{
    if (bottleneck == 0)
        throw ConfigError("lambda_for: bottleneck dim must be >= 1");
    return 0.001 * 128.0 / static_cast<double>(bottleneck);
}

AELoss ae_loss(const Matrix& x, const Matrix& x_hat, const Matrix& z, double lambda)
{
    require_same_shape(x, x_hat, "ae_loss reconstruction");
    if (z.rows() != x.rows())
        throw ShapeError("ae_loss: bottleneck batch has " + std::to_string(z.rows()) + " rows, input " +
                         std::to_string(x.rows()));
    AELoss out;
    auto mse = nn::mse_loss(x_hat, x);
    out.terms.recon = mse.value;
    out.grad_recon = std::move(mse.grad);
    out.terms.lambda = lambda;
    const double rows = static_cast<double>(z.rows());
    double sq = 0.0;
    out.grad_z = Matrix(z.rows(), z.cols());
    auto zv = z.values();
    auto gz = out.grad_z.values();
    for (std::size_t i = 0; i < zv.size(); ++i) {
        sq += zv[i] * zv[i];
        gz[i] = 2.0 * lambda * zv[i] / rows;
    }
    out.terms.latent_penalty = lambda * sq / rows;
    return out;
}

double rel_mse(const Matrix& x, const Matrix& x_hat)
{
    require_same_shape(x, x_hat, "rel_mse");
    const Matrix sums = col_sums(x);
    const double n = static_cast<double>(x.rows());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const double e = x(r, c) - x_hat(r, c);
            const double d = x(r, c) - sums(0, c) / n;
            sse += e * e;
            sst += d * d;
        }
    if (!(sst > 0.0))
        throw DataError("rel_mse: reference data has zero variance");
    return sse / sst;
}

LayerPlan plan_layers(std::size_t d, std::size_t bottleneck)
{
    if (bottleneck == 0 || bottleneck >= d)
        throw ConfigError("autoencoder bottleneck must be in [1, input dim)");
    LayerPlan p;
    p.encoder = plan_architecture(d);
    p.decoder.assign(p.encoder.rbegin(), p.encoder.rend());
    p.encoder.push_back(bottleneck);
    p.decoder.push_back(d);
    return p;
}

Autoencoder::Autoencoder(std::size_t input_dim, std::size_t bottleneck, Rng& init_rng,
                         const AELayerConfig& cfg, const std::string& name)
{
    const LayerPlan plan = plan_layers(input_dim, bottleneck);
    auto specs = [&](std::size_t in, const std::vector<std::size_t>& outs) {
        std::vector<DenseLayerSpec> out;
        for (std::size_t i = 0; i < outs.size(); ++i) {
            if (i + 1 < outs.size())
                out.push_back({in, outs[i], cfg.activation, cfg.batchnorm, cfg.dropout});
            else
                out.push_back({in, outs[i], nn::Activation::identity(), false, 0.0});
            in = outs[i];
        }
        return out;
    };
    const auto enc = specs(input_dim, plan.encoder);
    const auto dec = specs(bottleneck, plan.decoder);

    encoder_ = nn::DenseStack(enc, init_rng, name + ".encoder");
    decoder_ = nn::DenseStack(dec, init_rng, name + ".decoder");
}

Autoencoder::Autoencoder(nn::DenseStack encoder, nn::DenseStack decoder)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder))
{
    if (encoder_.out_dim() != decoder_.in_dim() || decoder_.out_dim() != encoder_.in_dim())
        throw ShapeError("autoencoder: encoder and decoder dims do not mirror");
}

Autoencoder::Output Autoencoder::forward(const Matrix& x, Mode mode, Rng& rng)
{
    Output out;
    out.z = encoder_.forward(x, mode, rng);
    out.reconstruction = decoder_.forward(out.z, mode, rng);
    return out;
}

void Autoencoder::backward(const Matrix& grad_reconstruction, const Matrix& grad_z)
{
    Matrix gz = decoder_.backward(grad_reconstruction);
    require_same_shape(gz, grad_z, "autoencoder bottleneck gradient");
    auto a = gz.values();
    auto b = grad_z.values();
    for (std::size_t i = 0; i < a.size(); ++i)
        a[i] += b[i];
    encoder_.backward(gz);
}

Matrix Autoencoder::encode(const Matrix& x) const
{
    return encoder_.infer(x);
}

Matrix Autoencoder::reconstruct(const Matrix& x) const
{
    return decoder_.infer(encoder_.infer(x));
}

std::vector<nn::ParamTensor*> Autoencoder::parameters()
{
    auto p = encoder_.parameters();
    for (auto* q : decoder_.parameters())
        p.push_back(q);
    return p;
}

std::vector<Matrix*> Autoencoder::buffers()
{
    auto b = encoder_.buffers();
    for (auto* q : decoder_.buffers())
        b.push_back(q);
    return b;
}

std::vector<std::size_t> Autoencoder::encoder_dims() const
{
    return layer_dims(encoder_);
}

std::vector<std::size_t> Autoencoder::decoder_dims() const
{
    return layer_dims(decoder_);
}

Standardizer Standardizer::fit(const Matrix& x)
{
    if (x.rows() == 0)
        throw DataError("standardizer: no rows");
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.mean.assign(x.cols(), 0.0);
    s.scale.assign(x.cols(), 1.0);
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double m = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r)
            m += x(r, c);
        m /= n;
        double v = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r)
            v += (x(r, c) - m) * (x(r, c) - m);
        v /= n;
        s.mean[c] = m;
        if (v > 0.0) {
            s.scale[c] = std::sqrt(v);
        } else {
            s.degenerate.push_back(c);
        }
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const
{
    if (x.cols() != mean.size())
        throw ShapeError("standardizer fitted on " + std::to_string(mean.size()) + " columns, got " +
                         std::to_string(x.cols()));
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c)
            out(r, c) = (x(r, c) - mean[c]) / scale[c];
    return out;
}

nlohmann::json Standardizer::to_json() const
{
    return {{"mean", mean}, {"scale", scale}, {"degenerate", degenerate}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j)
{
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    s.degenerate = j.at("degenerate").get<std::vector<std::size_t>>();
    if (s.mean.size() != s.scale.size())
        throw DataError("standardizer: mean / scale length mismatch");
    return s;
}

AETrainConfig::AETrainConfig()
{
    train.optimizer = nn::OptimizerConfig::adam(1e-4);
    train.batch_size = 256;
    train.clip_norm = 1.0;
    train.patience = 25;
}

TrainedGroup train_group_autoencoder(const FeatureGroup& group, const Matrix& data, const AETrainConfig& cfg)
{
    if (data.cols() != group.input_dim())
        throw ShapeError("group '" + group.name + "': expected " + std::to_string(group.input_dim()) +
                         " columns, got " + std::to_string(data.cols()));
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
        throw ConfigError("autoencoder validation fraction must be in (0, 1)");

    TrainedGroup out;
    out.group = group;
    out.seed = cfg.train.seed;
    out.standardizer = Standardizer::fit(data);
    const Matrix x = out.standardizer.apply(data);

    Rng split_rng(cfg.train.seed);
    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    split_rng.shuffle(std::span<std::size_t>(order));
    std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(x.rows())));
    n_val = std::max<std::size_t>(n_val, 2);
    if (x.rows() < n_val + 2)
        throw DataError("group '" + group.name + "': too few rows to train (" + std::to_string(x.rows()) + ")");
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    const Matrix x_train = select_rows(x, train_idx);
    const Matrix x_val = select_rows(x, val_idx);

    Rng init_rng(split_rng.next());
    out.model = Autoencoder(group.input_dim(), group.bottleneck, init_rng, cfg.layers, group.name);
    const double lambda = lambda_for(group.bottleneck);

    nn::Optimizer opt(cfg.train.optimizer, out.model.parameters());
    nn::Optimizer* opts[] = {&opt};
    Autoencoder& model = out.model;
    nn::TrainHooks hooks;
    hooks.train_batch = [&](std::span<const std::size_t> batch, Rng& rng) {
        const Matrix xb = select_rows(x_train, batch);
        auto fwd = model.forward(xb, Mode::Train, rng);
        auto loss = ae_loss(xb, fwd.reconstruction, fwd.z, lambda);
        model.backward(loss.grad_recon, loss.grad_z);
        return loss.terms.total();
    };
    hooks.validate = [&] {
        const Matrix z = model.encode(x_val);
        return ae_loss(x_val, model.decoder().infer(z), z, lambda).terms.total();
    };
    out.history = nn::fit(cfg.train, x_train.rows(), opts, model.buffers(), hooks);
    out.val_relmse = rel_mse(x_val, model.reconstruct(x_val));
    model.encoder().clear_cache();
    model.decoder().clear_cache();
    return out;
}

OnionEnsemble::OnionEnsemble(std::vector<TrainedGroup> groups) : groups_(std::move(groups))
{
    registry().validate();
}

Matrix OnionEnsemble::compress(const Matrix& raw) const
{
    std::vector<Matrix> blocks;
    blocks.reserve(groups_.size());
    for (const auto& g : groups_) {
        if (g.group.end > raw.cols())
            throw ShapeError("compress: raw matrix has " + std::to_string(raw.cols()) +
                             " columns, group '" + g.group.name + "' needs columns up to " +
                             std::to_string(g.group.end));
        const Matrix slice = slice_cols(raw, g.group.begin, g.group.end);
        blocks.push_back(g.model.encode(g.standardizer.apply(slice)));
    }
    return hconcat(blocks);
}

std::size_t OnionEnsemble::output_dim() const
{
    return registry().total_bottleneck();
}

GroupRegistry OnionEnsemble::registry() const
{
    GroupRegistry r;
    for (const auto& g : groups_)
        r.groups.push_back(g.group);
    return r;
}

std::vector<std::string> OnionEnsemble::output_names() const
{
    std::vector<std::string> names;
    for (const auto& g : groups_)
        for (std::size_t i = 0; i < g.group.bottleneck; ++i)
            names.push_back(g.group.name + "_z" + std::to_string(i));
    return names;
}

OnionEnsemble train_ensemble(const GroupRegistry& registry, const Matrix& raw_train, const AETrainConfig& cfg,
                             std::size_t threads)
{
    registry.validate(raw_train.cols());
    std::vector<TrainedGroup> results(registry.groups.size());
    std::vector<std::exception_ptr> errors(registry.groups.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < registry.groups.size(); i = next++) {
            try {
                const auto& g = registry.groups[i];
                AETrainConfig gcfg = cfg;
                gcfg.train.seed = group_seed(cfg.train.seed, g.name);
                results[i] = train_group_autoencoder(g, slice_cols(raw_train, g.begin, g.end), gcfg);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, registry.groups.size()));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_workers; ++t)
            pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return OnionEnsemble(std::move(results));
}

nlohmann::json to_json(const TrainedGroup& g)
{
    return {{"format", "gamenet.autoencoder"},
            {"version", nn::kCheckpointVersion},
            {"group",
             {{"name", g.group.name}, {"columns", {g.group.begin, g.group.end}}, {"bottleneck", g.group.bottleneck}}},
            {"seed", g.seed},
            {"val_relmse", g.val_relmse},
            {"best_epoch", g.history.best_epoch},
            {"standardizer", g.standardizer.to_json()},
            {"encoder", nn::to_json(g.model.encoder())},
            {"decoder", nn::to_json(g.model.decoder())}};
}

TrainedGroup trained_group_from_json(const nlohmann::json& j)
{
    if (j.value("format", std::string()) != "gamenet.autoencoder")
        throw DataError("not an autoencoder checkpoint");
    if (j.value("version", 0) != nn::kCheckpointVersion)
        throw DataError("unsupported autoencoder checkpoint version");
    TrainedGroup g;
    const auto& gj = j.at("group");
    const auto cols = gj.at("columns").get<std::vector<std::size_t>>();
    g.group = {gj.at("name").get<std::string>(), cols.at(0), cols.at(1), gj.at("bottleneck").get<std::size_t>()};
    g.seed = j.at("seed").get<std::uint64_t>();
    g.val_relmse = j.at("val_relmse").get<double>();
    g.history.best_epoch = j.value("best_epoch", std::size_t{0});
    g.standardizer = Standardizer::from_json(j.at("standardizer"));
    g.model = Autoencoder(nn::stack_from_json(j.at("encoder")), nn::stack_from_json(j.at("decoder")));
    if (g.model.input_dim() != g.group.input_dim() || g.model.bottleneck() != g.group.bottleneck ||
        g.standardizer.mean.size() != g.group.input_dim())
        throw DataError("autoencoder checkpoint for '" + g.group.name + "' has inconsistent dims");
    return g;
}

void save_ensemble(const std::filesystem::path& dir, const OnionEnsemble& ensemble)
{
    std::filesystem::create_directories(dir);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& g : ensemble.groups()) {
        const std::string file = g.group.name + ".ae.json";
        nn::write_json_file(dir / file, to_json(g));
        files.push_back(file);
    }
    const auto reg = ensemble.registry().to_json();
    nn::write_json_file(dir / "manifest.json",
                        {{"format", "gamenet.onion_ensemble"},
                         {"version", nn::kCheckpointVersion},
                         {"registry", reg},
                         {"registry_hash", sha256_hex(reg.dump())},
                         {"output_dim", ensemble.output_dim()},
                         {"files", files}});
}

OnionEnsemble load_ensemble(const std::filesystem::path& dir)
{
    const auto manifest = nn::read_json_file(dir / "manifest.json");
    if (manifest.value("format", std::string()) != "gamenet.onion_ensemble")
        throw DataError(dir.string() + ": not an autoencoder ensemble");
    const auto reg = manifest.at("registry");
    if (sha256_hex(reg.dump()) != manifest.at("registry_hash").get<std::string>())
        throw DataError(dir.string() + ": registry hash mismatch");
    std::vector<TrainedGroup> groups;
    for (const auto& f : manifest.at("files"))
        groups.push_back(trained_group_from_json(nn::read_json_file(dir / f.get<std::string>())));
    OnionEnsemble e(std::move(groups));
    if (e.registry().to_json() != reg)
        throw DataError(dir.string() + ": group checkpoints do not match the registry");
    return e;
}

} // namespace gamenet::ae
