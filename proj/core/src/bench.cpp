#include "cbfw/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "cbfw/rng.hpp"

namespace cbfw {

SystemModel TrialConfig::model() const
{
    switch (kind) {
    case SystemKind::SingleIntegrator: return SystemModel::single_integrator(5.0);
    case SystemKind::DoubleIntegrator: return SystemModel::double_integrator(5.0, v_max);
    case SystemKind::Manipulator3: return SystemModel::manipulator(2.0);
    }
    throw ContractViolation("unknown system kind");
}

void TrialConfig::validate() const
{
    sim.validate();
    filter.validate();
    if (std::abs(filter.dt - sim.dt) > 1e-15) throw ContractViolation("filter dt must match the simulation dt");
    if (kind != SystemKind::DoubleIntegrator && filter.family == FilterFamily::Hocbf)
        throw ContractViolation("hocbf family needs the double integrator");
    if (kind == SystemKind::DoubleIntegrator && filter.family == FilterFamily::Cbf)
        throw ContractViolation("first-order cbf family cannot constrain relative-degree-2 obstacles");
    if (environment && environment->kind != kind) throw ContractViolation("environment kind mismatch");
}

ClosedLoop::ClosedLoop(SystemModel model, Environment env, FilterSpec spec, NominalGains gains,
                       NominalPolicy nominal)
    : model_(std::move(model)),
      env_(std::move(env)),
      spec_(spec),
      gains_(gains),
      nominal_(nominal),
      barriers_(benchmark_barriers(env_, model_))
{
    spec_.validate();
    for (const auto& b : barriers_) require_compatible(b, model_);
}

Vec ClosedLoop::nominal_at(const State& x) const
{
    if (nominal_ == NominalPolicy::Zero) return Vec::Zero(model_.input_dim);
    return nominal_control(model_, x, env_.goal, gains_);
}

Vec ClosedLoop::barrier_values(const State& x) const
{
    Vec h(static_cast<Eigen::Index>(barriers_.size()));
    for (std::size_t i = 0; i < barriers_.size(); ++i)
        h[static_cast<Eigen::Index>(i)] = barrier_value(barriers_[i], model_, x);
    return h;
}

QpProblem ClosedLoop::problem_at(const State& x) const
{
    return build_problem(spec_, model_, barriers_, x, nominal_at(x));
}

StepRecord ClosedLoop::advance(const State& x, int k) const
{
    const ControlDecision d = filter(spec_, model_, barriers_, x, nominal_at(x));
    StepRecord r;
    r.u = clamp_input(model_, d.u);
    r.x = step(model_, x, r.u, spec_.dt);
    r.t = static_cast<double>(k + 1) * spec_.dt;
    r.h = barrier_values(r.x);
    r.feasible = d.feasible;
    r.solver_failure = d.solver_failure;
    r.clearance = min_clearance(env_, model_, r.x);
    return r;
}

Environment trial_environment(const TrialConfig& cfg)
{
    if (cfg.environment) return *cfg.environment;
    return sample_environment(cfg.seed, cfg.model(), cfg.world);
}

TrialResult run_trial(const TrialConfig& cfg)
{
    cfg.validate();
    const SystemModel model = cfg.model();
    const ClosedLoop loop(model, trial_environment(cfg), cfg.filter, cfg.gains, cfg.nominal);
    const Environment& env = loop.environment();

    TrialResult res;
    State x = env.start;
    res.min_clearance_seen = min_clearance(env, model, x);
    if (at_goal(env, model, x, cfg.sim.goal_tolerance)) res.reached_goal = true;

    for (int k = 0; k < cfg.sim.max_steps && !res.reached_goal; ++k) {
        StepRecord r = loop.advance(x, k);
        res.steps_used = k + 1;
        res.min_clearance_seen = std::min(res.min_clearance_seen, r.clearance);
        if (!r.feasible) ++res.infeasible_steps;
        res.solver_failure_any = res.solver_failure_any || r.solver_failure;
        x = r.x;
        res.reached_goal = at_goal(env, model, x, cfg.sim.goal_tolerance);
        const bool hit = is_collision(r.clearance);
        if (cfg.record_trace) res.trace.push_back(std::move(r));
        if (hit && cfg.stop_on_collision) break;
    }
    res.collided = is_collision(res.min_clearance_seen);
    res.infeasible_any = res.infeasible_steps > 0;
    res.final_state = x;
    return res;
}

bool replay_collided(const std::vector<StepRecord>& trace)
{
    return std::any_of(trace.begin(), trace.end(), [](const StepRecord& r) { return is_collision(r.clearance); });
}

namespace {

std::vector<double> to_std(const Vec& v)
{
    return {v.data(), v.data() + v.size()};
}

// JSON has no infinity; an obstacle-free clearance is written as null.
nlohmann::json finite_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const StepRecord& r)
{
    return {{"t", r.t},
            {"x", to_std(r.x)},
            {"u", to_std(r.u)},
            {"h", to_std(r.h)},
            {"feasible", r.feasible},
            {"clearance", finite_or_null(r.clearance)}};
}

nlohmann::json summary_json(const TrialResult& r)
{
    return {{"collided", r.collided},
            {"infeasible_any", r.infeasible_any},
            {"infeasible_steps", r.infeasible_steps},
            {"solver_failure_any", r.solver_failure_any},
            {"reached_goal", r.reached_goal},
            {"steps_used", r.steps_used},
            {"min_clearance_seen", finite_or_null(r.min_clearance_seen)},
            {"final_state", to_std(r.final_state)}};
}

std::string trace_jsonl(const std::vector<StepRecord>& trace)
{
    std::string out;
    for (const auto& r : trace) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

std::optional<TableId> parse_table_id(int id)
{
    if (id >= 1 && id <= 3) return static_cast<TableId>(id);
    return std::nullopt;
}

CellCounts& CellCounts::operator+=(const CellCounts& o)
{
    trials += o.trials;
    collisions += o.collisions;
    infeasible += o.infeasible;
    return *this;
}

CellCounts SweepTable::entry(int row, int column) const
{
    CellCounts sum;
    for (const auto& c : cells)
        if (c.row == row && c.column == column) sum += c.counts;
    return sum;
}

namespace {

constexpr double kSweepValues[] = {1.0, 2.0, 3.0, 4.0, 5.0};

std::string number_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

}  // namespace

SweepTable table_layout(TableId id)
{
    SweepTable t;
    t.id = id;
    switch (id) {
    case TableId::Passive: {
        t.axis_row = "system / constraint family";
        t.axis_column = "";
        t.row_labels = {"Single Integrator: CBF (gamma in {1,...,5})", "Single Integrator: Naive hard constraint",
                        "3-DOF Manipulator: CBF (gamma in {1,...,5})", "3-DOF Manipulator: Naive hard constraint"};
        t.column_labels = {"all"};
        const SystemKind kinds[] = {SystemKind::SingleIntegrator, SystemKind::Manipulator3};
        for (int s = 0; s < 2; ++s) {
            for (double g : kSweepValues)
                t.cells.push_back({2 * s, 0, kinds[s], FilterFamily::Cbf, g, 0.0, {}});
            t.cells.push_back({2 * s + 1, 0, kinds[s], FilterFamily::Naive, 1.0, 0.0, {}});
        }
        break;
    }
    case TableId::NaiveDouble:
        t.axis_row = "v_max (m/s)";
        t.axis_column = "";
        t.column_labels = {"all"};
        for (int r = 0; r < 5; ++r) {
            t.row_labels.push_back(number_label(kSweepValues[r]));
            t.cells.push_back({r, 0, SystemKind::DoubleIntegrator, FilterFamily::Naive, 1.0, kSweepValues[r], {}});
        }
        break;
    case TableId::HocbfGrid:
        t.axis_row = "gamma1=gamma2";
        t.axis_column = "v_max";
        for (int c = 0; c < 5; ++c) t.column_labels.push_back(number_label(kSweepValues[c]));
        for (int r = 0; r < 5; ++r) {
            t.row_labels.push_back(number_label(kSweepValues[r]));
            for (int c = 0; c < 5; ++c)
                t.cells.push_back({r, c, SystemKind::DoubleIntegrator, FilterFamily::Hocbf, kSweepValues[r],
                                   kSweepValues[c], {}});
        }
        break;
    }
    return t;
}

TrialConfig cell_trial_config(const SweepCell& cell, int trial_index, const SweepOptions& opts)
{
    TrialConfig cfg;
    cfg.kind = cell.kind;
    cfg.filter.family = cell.family;
    cfg.filter.gamma = cell.gain;
    cfg.filter.gamma1 = cell.gain;
    cfg.filter.gamma2 = cell.gain;
    cfg.filter.dt = opts.sim.dt;
    cfg.filter.bounds = cell.family == FilterFamily::Naive ? opts.naive_bounds : opts.cbf_bounds;
    cfg.v_max = cell.kind == SystemKind::DoubleIntegrator ? cell.v_max : 2.0;
    // Environments depend on the trial index only, so every cell of a table
    // faces the same layouts.
    cfg.seed = derive_seed(opts.master_seed, {static_cast<std::uint64_t>(trial_index)});
    cfg.sim = opts.sim;
    cfg.gains = opts.gains;
    cfg.world = opts.world;
    cfg.stop_on_collision = opts.stop_on_collision;
    return cfg;
}

SweepTable run_sweep(TableId id, const SweepOptions& opts)
{
    if (opts.trials_per_cell <= 0) throw ContractViolation("trials_per_cell must be positive");
    SweepTable table = table_layout(id);
    table.master_seed = opts.master_seed;
    table.trials_per_cell = opts.trials_per_cell;

    const std::size_t n_cells = table.cells.size();
    const std::size_t n_tasks = n_cells * static_cast<std::size_t>(opts.trials_per_cell);
    std::vector<TrialResult> results(n_tasks);
    std::atomic<std::size_t> next{0};

    const auto worker = [&] {
        for (std::size_t task = next++; task < n_tasks; task = next++) {
            const auto& cell = table.cells[task / static_cast<std::size_t>(opts.trials_per_cell)];
            const int trial = static_cast<int>(task % static_cast<std::size_t>(opts.trials_per_cell));
            results[task] = run_trial(cell_trial_config(cell, trial, opts));
        }
    };
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }

    for (std::size_t task = 0; task < n_tasks; ++task) {
        auto& counts = table.cells[task / static_cast<std::size_t>(opts.trials_per_cell)].counts;
        ++counts.trials;
        counts.collisions += results[task].collided ? 1 : 0;
        counts.infeasible += results[task].infeasible_any ? 1 : 0;
    }
    return table;
}

std::optional<TableFormat> parse_table_format(std::string_view name)
{
    if (name == "csv") return TableFormat::Csv;
    if (name == "markdown" || name == "md") return TableFormat::Markdown;
    if (name == "json") return TableFormat::Json;
    return std::nullopt;
}

namespace {

std::string pct(double rate)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.0f", rate);
    return buf;
}

std::string emit_markdown(const SweepTable& t)
{
    std::ostringstream os;
    const bool grid = t.column_labels.size() > 1;
    os << "| " << t.axis_row;
    if (grid) {
        for (const auto& c : t.column_labels) os << " | " << t.axis_column << "=" << c << " Col. | Inf.";
    } else {
        os << " | Col. Rate | Inf. Rate";
    }
    os << " |\n|---";
    for (std::size_t c = 0; c < t.column_labels.size(); ++c) os << "|---:|---:";
    os << "|\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        os << "| " << t.row_labels[r];
        for (std::size_t c = 0; c < t.column_labels.size(); ++c) {
            const auto e = t.entry(static_cast<int>(r), static_cast<int>(c));
            if (grid)
                os << " | " << pct(e.collision_rate()) << " | " << pct(e.infeasibility_rate());
            else
                os << " | " << pct(e.collision_rate()) << "% | " << pct(e.infeasibility_rate()) << "%";
        }
        os << " |\n";
    }
    return os.str();
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string emit_csv(const SweepTable& t)
{
    std::ostringstream os;
    os << "row,column,collision_rate,infeasibility_rate,trials,collisions,infeasible\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r)
        for (std::size_t c = 0; c < t.column_labels.size(); ++c) {
            const auto e = t.entry(static_cast<int>(r), static_cast<int>(c));
            os << csv_field(t.row_labels[r]) << ',' << csv_field(t.column_labels[c]) << ','
               << pct(e.collision_rate()) << ',' << pct(e.infeasibility_rate()) << ',' << e.trials << ','
               << e.collisions << ',' << e.infeasible << '\n';
        }
    return os.str();
}

std::string emit_json(const SweepTable& t)
{
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t r = 0; r < t.row_labels.size(); ++r)
        for (std::size_t c = 0; c < t.column_labels.size(); ++c) {
            const auto e = t.entry(static_cast<int>(r), static_cast<int>(c));
            entries.push_back({{"row", t.row_labels[r]},
                               {"column", t.column_labels[c]},
                               {"collision_rate", pct(e.collision_rate())},
                               {"infeasibility_rate", pct(e.infeasibility_rate())},
                               {"trials", e.trials},
                               {"collisions", e.collisions},
                               {"infeasible", e.infeasible}});
        }
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : t.cells)
        cells.push_back({{"row", c.row},
                         {"column", c.column},
                         {"system", std::string(to_string(c.kind))},
                         {"filter", std::string(to_string(c.family))},
                         {"gain", c.gain},
                         {"v_max", c.v_max},
                         {"trials", c.counts.trials},
                         {"collisions", c.counts.collisions},
                         {"infeasible", c.counts.infeasible}});
    const nlohmann::json doc = {{"table", static_cast<int>(t.id)},
                                {"master_seed", t.master_seed},
                                {"trials_per_cell", t.trials_per_cell},
                                {"axis_row", t.axis_row},
                                {"axis_column", t.axis_column},
                                {"rows", t.row_labels},
                                {"columns", t.column_labels},
                                {"entries", entries},
                                {"cells", cells}};
    return doc.dump(2) + "\n";
}

}  // namespace

std::string emit_table(const SweepTable& t, TableFormat format)
{
    switch (format) {
    case TableFormat::Csv: return emit_csv(t);
    case TableFormat::Markdown: return emit_markdown(t);
    case TableFormat::Json: return emit_json(t);
    }
    throw ContractViolation("unknown table format");
}

}  // namespace cbfw
