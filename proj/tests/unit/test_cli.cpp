#include "cli.hpp"

#include "gamenet/checkpoint.hpp"
#include "gamenet/error.hpp"
#include "gamenet/hash.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace gamenet;

namespace {

fs::path fresh(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("gamenet_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_tool(const std::string& args)
{
    const std::string cmd = std::string(GAMENET_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string small_config()
{
    return std::string(GAMENET_SOURCE_DIR) + "/configs/small.json";
}

void run_pipeline(const fs::path& ws)
{
    cli::RunOptions opts;
    opts.config = small_config();
    opts.workspace = ws;
    const auto ctx = cli::load_context(opts);
    std::ostringstream log;
    for (const char* sub : {"synth", "clean", "split", "ctd-extract", "ae-train", "compress", "train-phase1",
                            "train-phase2", "predict", "evaluate", "gate-report"})
        cli::run_subcommand(sub, ctx, log);
}

std::map<std::string, std::string> hashes(const fs::path& root)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        const auto rel = fs::relative(e.path(), root).string();
        if (rel.ends_with(".timing.json"))
            continue;
        out[rel] = sha256_file(e.path());
    }
    return out;
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("exit codes by failure class")
    {
        CHECK(cli::exit_code_for(std::make_exception_ptr(ConfigError("x"))) == cli::kUsage);
        CHECK(cli::exit_code_for(std::make_exception_ptr(InputError("x"))) == cli::kMissingInput);
        CHECK(cli::exit_code_for(std::make_exception_ptr(ShapeError("x"))) == cli::kDimensionMismatch);
        CHECK(cli::exit_code_for(std::make_exception_ptr(DataError("x"))) == cli::kDataError);
        CHECK(cli::exit_code_for(std::make_exception_ptr(NumericError("x"))) == cli::kNumericError);
        CHECK(cli::exit_code_for(std::make_exception_ptr(StateError("x"))) == cli::kStateError);
        CHECK(cli::exit_code_for(std::make_exception_ptr(std::runtime_error("x"))) == cli::kFailure);
    }

    TEST_CASE("binary exit codes")
    {
        const auto ws = fresh("exit");
        CHECK(run_tool("") == cli::kUsage);
        CHECK(run_tool("synth") == cli::kUsage);
        CHECK(run_tool("synth --config " + (ws / "missing.json").string()) == cli::kMissingInput);
        CHECK(run_tool("train-phase2 --config " + small_config() + " --workspace " + ws.string()) ==
              cli::kMissingInput);
        {
            std::ofstream(ws / "bad.json") << "{\"synth\": {\"n\": -3}}";
        }
        CHECK(run_tool("synth --config " + (ws / "bad.json").string() + " --workspace " + ws.string()) ==
              cli::kUsage);
        {
            std::ofstream(ws / "broken.json") << "{ not json";
        }
        CHECK(run_tool("synth --config " + (ws / "broken.json").string()) == cli::kUsage);
        fs::remove_all(ws);
    }

    TEST_CASE("phase two before phase one is a state error")
    {
        const auto ws = fresh("state");
        const std::string args = " --config " + small_config() + " --workspace " + ws.string();
        for (const char* sub : {"synth", "clean", "split", "ctd-extract", "ae-train", "compress"})
            REQUIRE(run_tool(std::string(sub) + args) == 0);
        cli::RunOptions opts;
        opts.config = small_config();
        opts.workspace = ws;
        auto ctx = cli::load_context(opts);
        ctx.config["model"]["phase1"]["max_epochs"] = 1;
        std::ostringstream log;
        cli::run_subcommand("train-phase1", ctx, log);
        auto manifest = nn::read_json_file(ws / "models/phase1/manifest.json");
        manifest["pretrained"]["lyrics"] = false;
        nn::write_json_file(ws / "models/phase1/manifest.json", manifest);
        CHECK(run_tool("train-phase2" + args) == cli::kStateError);
        fs::remove_all(ws);
    }

    TEST_CASE("evaluate on perfect predictions reports r2 of 1")
    {
        const auto ws = fresh("eval");
        fs::create_directories(ws / "predictions");
        {
            std::ofstream out(ws / "predictions/test.csv");
            out << "track_id,y_true,y_pred\n";
            for (int i = 0; i < 20; ++i)
                out << "T" << i << "," << (i * 5) << "," << (i * 5) << "\n";
        }
        {
            std::ofstream(ws / "cfg.json") << "{}";
        }
        CHECK(run_tool("evaluate --config " + (ws / "cfg.json").string() + " --workspace " + ws.string()) == 0);
        const auto report = nn::read_json_file(ws / "reports/metrics.json");
        CHECK(report["scaled"]["r2"].get<double>() == 1.0);
        CHECK(report["unscaled"]["mae"].get<double>() == 0.0);
        const auto man = nn::read_json_file(ws / "manifests/evaluate.json");
        CHECK(man["subcommand"] == "evaluate");
        CHECK(man["outputs"].contains("reports/metrics.json"));
        fs::remove_all(ws);
    }

    TEST_CASE("full pipeline is complete and reproducible")
    {
        const auto a = fresh("pipe_a");
        const auto b = fresh("pipe_b");
        run_pipeline(a);
        run_pipeline(b);
        for (const char* sub : {"synth", "clean", "split", "ctd-extract", "ae-train", "compress", "train-phase1",
                                "train-phase2", "predict", "evaluate", "gate-report"})
            CHECK(fs::exists(a / "manifests" / (std::string(sub) + ".json")));
        const auto ha = hashes(a);
        CHECK(ha == hashes(b));
        CHECK(ha.count("predictions/test.csv") == 1);
        const auto report = nn::read_json_file(a / "reports/metrics.json");
        CHECK(report["scaled"]["r2"].get<double>() > 0.2);
        fs::remove_all(a);
        fs::remove_all(b);
    }

    TEST_CASE("seed override changes the run and is recorded")
    {
        const auto ws = fresh("seed");
        CHECK(run_tool("synth --seed 7 --config " + small_config() + " --workspace " + ws.string()) == 0);
        const auto man = nn::read_json_file(ws / "manifests/synth.json");
        CHECK(man["seed"] == 7);
        const auto first = sha256_file(ws / "raw/metadata.csv");
        CHECK(run_tool("synth --seed 8 --config " + small_config() + " --workspace " + ws.string()) == 0);
        CHECK(sha256_file(ws / "raw/metadata.csv") != first);
        fs::remove_all(ws);
    }
}
