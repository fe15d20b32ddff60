#include "gamenet/ctd.hpp"
#include "gamenet/matrix.hpp"
#include "gamenet/model.hpp"
#include "gamenet/network.hpp"
#include "gamenet/rng.hpp"

#include <benchmark/benchmark.h>

#include <map>
#include <string>
#include <vector>

using namespace gamenet;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols)
{
    Matrix m(rows, cols);
    for (double& v : m.values())
        v = rng.normal();
    return m;
}

void BM_Matmul(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix a = random_matrix(rng, n, n), b = random_matrix(rng, n, n);
    for (auto _ : state)
        benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256)->Arg(512);

void BM_DenseForwardBackward(benchmark::State& state)
{
    const auto batch = static_cast<std::size_t>(state.range(0));
    Rng rng(2);
    nn::DenseStack net({{768, 256, nn::Activation::elu(0.1), true, 0.3},
                        {256, 64, nn::Activation::elu(0.1), true, 0.2},
                        {64, 1, nn::Activation::sigmoid(), false, 0.0}},
                       rng, "bench");
    const Matrix x = random_matrix(rng, batch, 768);
    const Matrix g = random_matrix(rng, batch, 1);
    for (auto _ : state) {
        net.zero_grad();
        benchmark::DoNotOptimize(net.forward(x, nn::Mode::Train, rng));
        benchmark::DoNotOptimize(net.backward(g));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_DenseForwardBackward)->Arg(32)->Arg(256);

void BM_GameNetPredict(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto cfg = ModelConfig::defaults(128, 384, 31);
    const GameNet model(cfg, 3);
    Rng rng(3);
    ModalityInputs x;
    for (Modality m : kModalities)
        x[index(m)] = random_matrix(rng, n, cfg.branches[index(m)].input_dim);
    for (auto _ : state)
        benchmark::DoNotOptimize(model.predict(x));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_GameNetPredict)->Arg(1024);

struct EventLog {
    std::vector<ctd::ListeningEvent> events;
    std::map<std::string, std::string> artist_of;
};

EventLog make_log(std::size_t n_events)
{
    Rng rng(4);
    EventLog log;
    const std::size_t tracks = 2000, users = 20000;
    for (std::size_t t = 0; t < tracks; ++t)
        log.artist_of["t" + std::to_string(t)] = "a" + std::to_string(rng.index(200));
    const std::int64_t start = 1420070400, span = 8LL * 365 * 86400;
    log.events.reserve(n_events);
    for (std::size_t i = 0; i < n_events; ++i) {
        const auto u = rng.index(users), t = rng.index(rng.index(tracks) + 1);
        log.events.push_back({"u" + std::to_string(u), "t" + std::to_string(t),
                               start + static_cast<std::int64_t>(rng.uniform() * static_cast<double>(span))});
    }
    return log;
}

void BM_CtdIngest(benchmark::State& state)
{
    const auto log = make_log(static_cast<std::size_t>(state.range(0)));
    const auto schema = ctd::Schema::make(ctd::Mode::Aggregate);
    for (auto _ : state)
        benchmark::DoNotOptimize(ctd::ingest_events(log.events, schema.window));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CtdIngest)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_CtdBuildDataset(benchmark::State& state)
{
    const auto log = make_log(static_cast<std::size_t>(state.range(0)));
    const auto schema = ctd::Schema::make(ctd::Mode::Temporal);
    const auto counts = ctd::ingest_events(log.events, schema.window).counts;
    for (auto _ : state)
        benchmark::DoNotOptimize(ctd::build_dataset(counts, log.artist_of, schema));
}
BENCHMARK(BM_CtdBuildDataset)->Arg(100000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
