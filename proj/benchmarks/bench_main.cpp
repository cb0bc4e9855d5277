#include <benchmark/benchmark.h>

#include "cbfw/bench.hpp"
#include "cbfw/certify.hpp"
#include "cbfw/rng.hpp"

using namespace cbfw;

namespace {

QpProblem random_problem(Rng& rng, int rows)
{
    QpProblem p;
    p.box = Vec::Constant(2, 5.0);
    p.u_nom = Vec(2);
    p.u_nom << rng.uniform(-8, 8), rng.uniform(-8, 8);
    for (int i = 0; i < rows; ++i) {
        Vec a(2);
        a << rng.uniform(-1, 1), rng.uniform(-1, 1);
        p.rows.push_back({a, rng.uniform(-1.0, 0.0)});
    }
    return p;
}

void BM_QpSolve(benchmark::State& state)
{
    Rng rng(1);
    std::vector<QpProblem> problems;
    for (int i = 0; i < 256; ++i) problems.push_back(random_problem(rng, static_cast<int>(state.range(0))));
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(solve(problems[i++ % problems.size()]));
}
BENCHMARK(BM_QpSolve)->Arg(1)->Arg(4)->Arg(11);

// One control step: nominal policy plus the filter over every benchmark barrier.
void BM_FilterStep(benchmark::State& state)
{
    const auto kind = static_cast<SystemKind>(state.range(0));
    TrialConfig cfg;
    cfg.kind = kind;
    cfg.filter.family = kind == SystemKind::DoubleIntegrator ? FilterFamily::Hocbf : FilterFamily::Cbf;
    const SystemModel m = cfg.model();
    const Environment env = trial_environment(cfg);
    const auto barriers = benchmark_barriers(env, m);
    for (auto _ : state) {
        const Vec u = nominal_control(m, env.start, env.goal);
        benchmark::DoNotOptimize(filter(cfg.filter, m, barriers, env.start, u));
    }
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_FilterStep)
    ->Arg(static_cast<int>(SystemKind::SingleIntegrator))
    ->Arg(static_cast<int>(SystemKind::DoubleIntegrator))
    ->Arg(static_cast<int>(SystemKind::Manipulator3));

void BM_Trial(benchmark::State& state)
{
    TrialConfig cfg;
    cfg.kind = SystemKind::DoubleIntegrator;
    cfg.filter.family = FilterFamily::Hocbf;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        cfg.seed = seed++;
        benchmark::DoNotOptimize(run_trial(cfg));
    }
}
BENCHMARK(BM_Trial)->Unit(benchmark::kMillisecond);

void BM_PointwiseMargin(benchmark::State& state)
{
    const auto di = SystemModel::double_integrator();
    const Barrier b = Barrier::circle({5, 5}, 0.65);
    State x(4);
    x << 3, 4, 1, -1;
    for (auto _ : state) benchmark::DoNotOptimize(pointwise_margin(di, b, {1.0, 1.0}, x));
}
BENCHMARK(BM_PointwiseMargin);

}  // namespace

BENCHMARK_MAIN();
