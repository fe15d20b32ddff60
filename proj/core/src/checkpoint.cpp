#include "gamenet/checkpoint.hpp"

#include "gamenet/error.hpp"

#include <fstream>

namespace gamenet::nn {

Json to_json(const Matrix& m)
{
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

Matrix matrix_from_json(const Json& j)
{
    try {
        return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                      j.at("data").get<std::vector<double>>());
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed matrix in checkpoint: ") + e.what());
    }
}

Json to_json(const Activation& a)
{
    return Json{{"kind", a.name()}, {"param", a.param}};
}

Activation activation_from_json(const Json& j)
{
    Activation a{parse_activation_kind(j.at("kind").get<std::string>()), j.value("param", 0.0)};
    a.validate();
    return a;
}

Json to_json(const DenseLayerSpec& s)
{
    return Json{{"in_dim", s.in_dim},
                {"out_dim", s.out_dim},
                {"activation", to_json(s.activation)},
                {"batchnorm", s.batchnorm},
                {"dropout", s.dropout}};
}

DenseLayerSpec layer_spec_from_json(const Json& j)
{
    DenseLayerSpec s;
    s.in_dim = j.at("in_dim").get<std::size_t>();
    s.out_dim = j.at("out_dim").get<std::size_t>();
    s.activation = activation_from_json(j.at("activation"));
    s.batchnorm = j.at("batchnorm").get<bool>();
    s.dropout = j.at("dropout").get<double>();
    s.validate();
    return s;
}

Json to_json(const DenseStack& stack)
{
    Json layers = Json::array();
    BatchNormConfig bn;
    for (std::size_t i = 0; i < stack.size(); ++i) {
        const DenseLayer& l = stack.layer(i);
        bn = l.batchnorm_config();
        Json lj{{"spec", to_json(l.spec())},
                {"weight", to_json(l.weight().value)},
                {"bias", to_json(l.bias().value)}};
        if (l.spec().batchnorm) {
            lj["gamma"] = to_json(l.gamma().value);
            lj["beta"] = to_json(l.beta().value);
            lj["running_mean"] = to_json(l.running_mean());
            lj["running_var"] = to_json(l.running_var());
        }
        layers.push_back(std::move(lj));
    }
    return Json{{"name", stack.name()},
                {"batchnorm", {{"momentum", bn.momentum}, {"eps", bn.eps}}},
                {"layers", std::move(layers)}};
}

DenseStack stack_from_json(const Json& j)
{
    try {
        std::vector<DenseLayerSpec> specs;
        for (const auto& lj : j.at("layers"))
            specs.push_back(layer_spec_from_json(lj.at("spec")));
        BatchNormConfig bn;
        bn.momentum = j.at("batchnorm").at("momentum").get<double>();
        bn.eps = j.at("batchnorm").at("eps").get<double>();
        Rng dummy(0);
        DenseStack stack(specs, dummy, j.at("name").get<std::string>(), bn);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const Json& lj = j.at("layers").at(i);
            DenseLayer& l = stack.layer(i);
            auto load = [](Matrix& dst, const Json& src, const char* what) {
                Matrix m = matrix_from_json(src);
                require_same_shape(m, dst, what);
                dst = std::move(m);
            };
            load(l.weight().value, lj.at("weight"), "checkpoint weight");
            load(l.bias().value, lj.at("bias"), "checkpoint bias");
            if (specs[i].batchnorm) {
                load(l.gamma().value, lj.at("gamma"), "checkpoint gamma");
                load(l.beta().value, lj.at("beta"), "checkpoint beta");
                load(l.running_mean(), lj.at("running_mean"), "checkpoint running_mean");
                load(l.running_var(), lj.at("running_var"), "checkpoint running_var");
            }
        }
        return stack;
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed network checkpoint: ") + e.what());
    }
}

Json to_json(const OptimizerConfig& cfg)
{
    return Json{{"kind", to_string(cfg.kind)}, {"lr", cfg.lr},     {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},          {"eps", cfg.eps},   {"weight_decay", cfg.weight_decay}};
}

OptimizerConfig optimizer_config_from_json(const Json& j)
{
    OptimizerConfig c;
    c.kind = parse_optimizer_kind(j.value("kind", std::string("adam")));
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.kind == OptimizerKind::AdamW ? 0.01 : 0.0);
    c.validate();
    return c;
}

Json to_json(const Optimizer& opt)
{
    Json first = Json::array();
    Json second = Json::array();
    for (const auto& m : opt.first_moments())
        first.push_back(to_json(m));
    for (const auto& v : opt.second_moments())
        second.push_back(to_json(v));
    return Json{{"config", to_json(opt.config())},
                {"step_count", opt.step_count()},
                {"first_moment", std::move(first)},
                {"second_moment", std::move(second)}};
}

void load_optimizer_state(Optimizer& opt, const Json& j)
{
    std::vector<Matrix> first;
    std::vector<Matrix> second;
    for (const auto& m : j.at("first_moment"))
        first.push_back(matrix_from_json(m));
    for (const auto& v : j.at("second_moment"))
        second.push_back(matrix_from_json(v));
    opt.set_lr(j.at("config").at("lr").get<double>());
    opt.load_state(j.at("step_count").get<std::size_t>(), std::move(first), std::move(second));
}

Json make_checkpoint(const DenseStack& stack, std::uint64_t seed, const Optimizer* opt)
{
    Json j{{"format", "gamenet.network"},
           {"version", kCheckpointVersion},
           {"seed", seed},
           {"network", to_json(stack)}};
    if (opt != nullptr)
        j["optimizer"] = to_json(*opt);
    return j;
}

LoadedCheckpoint read_checkpoint(const Json& j)
{
    if (j.value("format", std::string()) != "gamenet.network")
        throw DataError("not a gamenet network checkpoint");
    if (j.value("version", 0) != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
    LoadedCheckpoint out{stack_from_json(j.at("network")), j.at("seed").get<std::uint64_t>(), {}};
    if (j.contains("optimizer"))
        out.optimizer = j.at("optimizer");
    return out;
}

void write_json_file(const std::filesystem::path& path, const Json& j)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

} // namespace gamenet::nn
