#include <gtest/gtest.h>

#include <sstream>

#include "cbfw/bench.hpp"

using namespace cbfw;

namespace {

TrialConfig config(SystemKind kind, FilterFamily family, std::uint64_t seed, double gain = 1.0)
{
    TrialConfig cfg;
    cfg.kind = kind;
    cfg.filter.family = family;
    cfg.filter.gamma = cfg.filter.gamma1 = cfg.filter.gamma2 = gain;
    cfg.filter.bounds = default_input_bounds(family);
    cfg.seed = seed;
    return cfg;
}

double min_obstacle_h(const TrialConfig& cfg, const State& x)
{
    const SystemModel m = cfg.model();
    double h = std::numeric_limits<double>::infinity();
    for (const Barrier& b : obstacle_barriers(trial_environment(cfg), m)) h = std::min(h, barrier_value(b, m, x));
    return h;
}

}  // namespace

TEST(Bench, SingleIntegratorCbfNeverCollides)
{
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const TrialResult r = run_trial(config(SystemKind::SingleIntegrator, FilterFamily::Cbf, seed));
        EXPECT_FALSE(r.collided) << seed;
        EXPECT_FALSE(r.infeasible_any) << seed;
        EXPECT_GE(r.min_clearance_seen, -1e-9) << seed;
    }
}

TEST(Bench, FreeSpaceReachesTheGoal)
{
    const std::pair<SystemKind, FilterFamily> setups[] = {{SystemKind::SingleIntegrator, FilterFamily::Cbf},
                                                          {SystemKind::DoubleIntegrator, FilterFamily::Hocbf},
                                                          {SystemKind::Manipulator3, FilterFamily::Cbf},
                                                          {SystemKind::SingleIntegrator, FilterFamily::Naive}};
    for (const auto& [kind, family] : setups) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            TrialConfig cfg = config(kind, family, seed);
            Environment env = trial_environment(cfg);
            env.obstacles.clear();
            cfg.environment = env;
            const TrialResult r = run_trial(cfg);
            EXPECT_TRUE(r.reached_goal) << to_string(kind) << " seed " << seed;
            EXPECT_FALSE(r.collided);
            EXPECT_FALSE(r.infeasible_any);
        }
    }
}

TEST(Bench, ZeroNominalLeavesDriftlessSystemsAtRest)
{
    for (auto kind : {SystemKind::SingleIntegrator, SystemKind::Manipulator3}) {
        for (auto family : {FilterFamily::Cbf, FilterFamily::Naive}) {
            for (std::uint64_t seed = 0; seed < 50; ++seed) {
                TrialConfig cfg = config(kind, family, seed, 1.0 + static_cast<double>(seed % 5));
                cfg.nominal = NominalPolicy::Zero;
                cfg.sim.max_steps = 200;
                const TrialResult r = run_trial(cfg);
                EXPECT_EQ(r.final_state, trial_environment(cfg).start);
                EXPECT_FALSE(r.collided);
                EXPECT_FALSE(r.infeasible_any);
            }
        }
    }
}

TEST(Bench, TrialsAreDeterministic)
{
    for (auto [kind, family] : {std::pair{SystemKind::DoubleIntegrator, FilterFamily::Naive},
                                std::pair{SystemKind::Manipulator3, FilterFamily::Cbf}}) {
        TrialConfig cfg = config(kind, family, 99);
        cfg.record_trace = true;
        const TrialResult a = run_trial(cfg);
        const TrialResult b = run_trial(cfg);
        EXPECT_EQ(trace_jsonl(a.trace), trace_jsonl(b.trace));
        EXPECT_EQ(summary_json(a), summary_json(b));
        EXPECT_EQ(a.final_state, b.final_state);
    }
}

TEST(Bench, OutcomeFlagsAgreeWithTheTrace)
{
    int collided = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        TrialConfig cfg = config(SystemKind::DoubleIntegrator, FilterFamily::Naive, seed);
        cfg.v_max = 3.0;
        cfg.record_trace = true;
        cfg.stop_on_collision = seed % 2 == 0;
        const TrialResult r = run_trial(cfg);
        collided += r.collided;
        EXPECT_EQ(replay_collided(r.trace), r.collided);
        EXPECT_EQ(r.collided, is_collision(r.min_clearance_seen));
        EXPECT_EQ(r.infeasible_any, r.infeasible_steps > 0);
        EXPECT_EQ(static_cast<int>(r.trace.size()), r.steps_used);
        for (const StepRecord& s : r.trace) EXPECT_EQ(s.clearance < 0.0, min_obstacle_h(cfg, s.x) < 0.0);
    }
    EXPECT_GT(collided, 10);
}

TEST(Bench, CollisionsAreLatchedWhenTheTrialContinues)
{
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        TrialConfig cfg = config(SystemKind::DoubleIntegrator, FilterFamily::Naive, seed);
        cfg.v_max = 4.0;
        cfg.stop_on_collision = false;
        cfg.record_trace = true;
        const TrialResult r = run_trial(cfg);
        if (!r.collided) continue;
        // After the first contact the trial keeps stepping.
        const auto first = std::find_if(r.trace.begin(), r.trace.end(),
                                         [](const StepRecord& s) { return is_collision(s.clearance); });
        ASSERT_NE(first, r.trace.end());
        EXPECT_LT(std::distance(r.trace.begin(), first) + 1, static_cast<long>(r.trace.size()));
        return;
    }
    FAIL() << "no collision in 40 naive trials";
}

TEST(Bench, TraceLinesCarryTheDocumentedFields)
{
    TrialConfig cfg = config(SystemKind::DoubleIntegrator, FilterFamily::Hocbf, 3);
    cfg.record_trace = true;
    cfg.sim.max_steps = 20;
    const TrialResult r = run_trial(cfg);
    std::istringstream in(trace_jsonl(r.trace));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* key : {"t", "x", "u", "h", "feasible", "clearance"}) EXPECT_TRUE(j.contains(key)) << key;
        EXPECT_EQ(j.at("x").size(), 4u);
        EXPECT_EQ(j.at("u").size(), 2u);
        EXPECT_EQ(j.at("h").size(), 11u);  // 10 obstacles and the speed envelope
        ++n;
    }
    EXPECT_EQ(n, 20);
}

TEST(Sweep, TableLayouts)
{
    const SweepTable t1 = table_layout(TableId::Passive);
    EXPECT_EQ(t1.row_labels.size(), 4u);
    EXPECT_EQ(t1.column_labels.size(), 1u);
    EXPECT_EQ(t1.cells.size(), 12u);  // 5 CBF gains + naive, per system

    const SweepTable t2 = table_layout(TableId::NaiveDouble);
    EXPECT_EQ(t2.row_labels.size(), 5u);
    EXPECT_EQ(t2.column_labels.size(), 1u);
    for (const auto& c : t2.cells) EXPECT_EQ(c.family, FilterFamily::Naive);

    const SweepTable t3 = table_layout(TableId::HocbfGrid);
    EXPECT_EQ(t3.row_labels.size(), 5u);
    EXPECT_EQ(t3.column_labels.size(), 5u);
    EXPECT_EQ(t3.cells.size(), 25u);

    EXPECT_FALSE(parse_table_id(4).has_value());
    EXPECT_FALSE(parse_table_format("xml").has_value());
}

TEST(Sweep, OutputIsIndependentOfJobs)
{
    SweepOptions opts;
    opts.trials_per_cell = 4;
    opts.master_seed = 7;
    opts.jobs = 1;
    const SweepTable a = run_sweep(TableId::HocbfGrid, opts);
    opts.jobs = 3;
    const SweepTable b = run_sweep(TableId::HocbfGrid, opts);
    for (auto f : {TableFormat::Csv, TableFormat::Markdown, TableFormat::Json})
        EXPECT_EQ(emit_table(a, f), emit_table(b, f));
}

TEST(Sweep, JsonCountsAreConsistent)
{
    SweepOptions opts;
    opts.trials_per_cell = 3;
    opts.jobs = 2;
    const SweepTable t = run_sweep(TableId::Passive, opts);
    const auto doc = nlohmann::json::parse(emit_table(t, TableFormat::Json));
    EXPECT_EQ(doc.at("table"), 1);
    EXPECT_EQ(doc.at("trials_per_cell"), 3);
    for (const auto& c : doc.at("cells")) EXPECT_EQ(c.at("trials"), 3);
    const int expected[] = {15, 3, 15, 3};
    int i = 0;
    for (const auto& e : doc.at("entries")) {
        EXPECT_EQ(e.at("trials"), expected[i++]);
        // Rates are printed with 0 decimals, as strings.
        const double rate = std::stod(e.at("collision_rate").get<std::string>());
        EXPECT_GE(rate, 0.0);
        EXPECT_LE(rate, 100.0);
        EXPECT_LE(e.at("collisions").get<int>(), e.at("trials").get<int>());
    }

    const std::string csv = emit_table(t, TableFormat::Csv);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

// Per-trial seeding makes every cell a pure function of (master seed, cell, trial).
TEST(Sweep, CellTrialConfigsAreSharedAcrossCells)
{
    const SweepTable t = table_layout(TableId::HocbfGrid);
    SweepOptions opts;
    const TrialConfig a = cell_trial_config(t.cells[0], 5, opts);
    const TrialConfig b = cell_trial_config(t.cells[7], 5, opts);
    EXPECT_EQ(to_json(trial_environment(a)), to_json(trial_environment(b)));
    const TrialConfig c = cell_trial_config(t.cells[0], 6, opts);
    EXPECT_NE(to_json(trial_environment(a)), to_json(trial_environment(c)));

    // Single trials latch collisions and run on; table trials end at contact.
    EXPECT_FALSE(TrialConfig{}.stop_on_collision);
    EXPECT_TRUE(a.stop_on_collision);
    opts.stop_on_collision = false;
    EXPECT_FALSE(cell_trial_config(t.cells[0], 5, opts).stop_on_collision);
}
