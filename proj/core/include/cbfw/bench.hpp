#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfw/filters.hpp"
#include "cbfw/world.hpp"

namespace cbfw {

enum class NominalPolicy { GoalSeeking, Zero };

struct TrialConfig {
    SystemKind kind = SystemKind::SingleIntegrator;
    FilterSpec filter;
    double v_max = 2.0;  // double integrator speed envelope
    std::uint64_t seed = 0;
    SimConfig sim;
    NominalGains gains;
    NominalPolicy nominal = NominalPolicy::GoalSeeking;
    bool record_trace = false;
    /// A collision ends the trial; otherwise it is latched and the loop runs on.
    bool stop_on_collision = false;
    WorldParams world;
    /// Replaces the sampled environment when set.
    std::optional<Environment> environment;

    SystemModel model() const;
    void validate() const;
};

/// One closed-loop step: the state reached at time t, the input that produced
/// it, and the barrier values, feasibility flag and clearance at that state.
struct StepRecord {
    double t = 0.0;
    State x;
    Vec u;
    Vec h;
    bool feasible = true;
    bool solver_failure = false;  // not part of the trace format
    double clearance = 0.0;
};

struct TrialResult {
    bool collided = false;
    bool infeasible_any = false;
    int infeasible_steps = 0;
    bool solver_failure_any = false;
    bool reached_goal = false;
    int steps_used = 0;
    double min_clearance_seen = 0.0;
    State final_state;
    std::vector<StepRecord> trace;
};

/**
 * Shared closed loop of the bench and the playground:
 * nominal -> filter -> clamp -> Euler step -> clearance.
 */
class ClosedLoop {
public:
    ClosedLoop(SystemModel model, Environment env, FilterSpec spec, NominalGains gains = {},
               NominalPolicy nominal = NominalPolicy::GoalSeeking);

    /// Advance from x (at step index k) to step k + 1.
    StepRecord advance(const State& x, int k) const;

    /// The QP the filter would solve at x.
    QpProblem problem_at(const State& x) const;

    Vec nominal_at(const State& x) const;
    Vec barrier_values(const State& x) const;

    const SystemModel& model() const { return model_; }
    const Environment& environment() const { return env_; }
    const FilterSpec& spec() const { return spec_; }
    const std::vector<Barrier>& barriers() const { return barriers_; }

private:
    SystemModel model_;
    Environment env_;
    FilterSpec spec_;
    NominalGains gains_;
    NominalPolicy nominal_;
    std::vector<Barrier> barriers_;
};

Environment trial_environment(const TrialConfig& cfg);

TrialResult run_trial(const TrialConfig& cfg);

/// Recompute the collision flag from logged records.
bool replay_collided(const std::vector<StepRecord>& trace);

nlohmann::json to_json(const StepRecord& r);
nlohmann::json summary_json(const TrialResult& r);
/// One JSON object per line.
std::string trace_jsonl(const std::vector<StepRecord>& trace);

// ---------------------------------------------------------------------------
// Sweeps

enum class TableId { Passive = 1, NaiveDouble = 2, HocbfGrid = 3 };

std::optional<TableId> parse_table_id(int id);

struct CellCounts {
    int trials = 0;
    int collisions = 0;
    int infeasible = 0;

    double collision_rate() const { return trials ? 100.0 * collisions / trials : 0.0; }
    double infeasibility_rate() const { return trials ? 100.0 * infeasible / trials : 0.0; }
    CellCounts& operator+=(const CellCounts& o);
};

/// One parameter setting of a table, run for trials_per_cell trials.
struct SweepCell {
    int row = 0;
    int column = 0;
    SystemKind kind = SystemKind::SingleIntegrator;
    FilterFamily family = FilterFamily::Cbf;
    double gain = 1.0;   // gamma, or gamma1 = gamma2 for hocbf; unused by naive
    double v_max = 0.0;  // double integrator only
    CellCounts counts;
};

/// Tables 1-3 layout. Table 1 rows aggregate several cells (one per gain), so a
/// printed entry there covers trials_per_cell * cells_in_row trials.
struct SweepTable {
    TableId id = TableId::Passive;
    std::uint64_t master_seed = 0;
    int trials_per_cell = 0;
    std::string axis_row;
    std::string axis_column;
    std::vector<std::string> row_labels;
    std::vector<std::string> column_labels;
    std::vector<SweepCell> cells;

    CellCounts entry(int row, int column) const;
};

struct SweepOptions {
    int trials_per_cell = 100;
    std::uint64_t master_seed = 42;
    int jobs = 1;
    SimConfig sim;
    NominalGains gains;
    WorldParams world;
    InputBounds cbf_bounds = InputBounds::InQp;
    InputBounds naive_bounds = InputBounds::ClampAfter;
    /// Table trials end at the first contact. Continuing drives the robot into
    /// overlapping obstacles, where the naive rows contradict each other.
    bool stop_on_collision = true;
};

/// Cells of a table, counts zeroed.
SweepTable table_layout(TableId id);

/// The trial config of one (cell, trial) pair.
TrialConfig cell_trial_config(const SweepCell& cell, int trial_index, const SweepOptions& opts);

SweepTable run_sweep(TableId id, const SweepOptions& opts);

enum class TableFormat { Csv, Markdown, Json };
std::optional<TableFormat> parse_table_format(std::string_view name);

std::string emit_table(const SweepTable& t, TableFormat format);

}  // namespace cbfw
