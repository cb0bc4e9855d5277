#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "cbfw/barriers.hpp"
#include "cbfw/qp.hpp"

namespace cbfw {

/**
 * Constraint families. Cbf and Naive build one row per barrier from its
 * relative degree: Naive uses the one-step prediction h(x_{k+1}) >= 0 on
 * degree-1 pairings and the second-order Taylor prediction h(x_{k+2}) >= 0 on
 * degree-2 pairings. Hocbf handles degree-2 pairings with the linear
 * (gamma1, gamma2) chain and degree-1 pairings (the speed envelope) with a
 * first-order row at gamma1.
 */
enum class FilterFamily { Cbf, Hocbf, Naive };

std::string_view to_string(FilterFamily family);
std::optional<FilterFamily> parse_filter_family(std::string_view name);

/// Where the actuator limits enter.
enum class InputBounds {
    InQp,        // the box is part of the QP; an empty admissible set is reported
    ClampAfter,  // the QP is posed over R^m and its solution is clipped to the box
};

std::string_view to_string(InputBounds bounds);
std::optional<InputBounds> parse_input_bounds(std::string_view name);

/// Naive rows carry too little authority to coexist with the box, so the
/// naive family clips after the solve; the others keep the box in the QP.
InputBounds default_input_bounds(FilterFamily family);

struct FilterSpec {
    FilterFamily family = FilterFamily::Cbf;
    double gamma = 1.0;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double dt = 0.01;
    InputBounds bounds = InputBounds::InQp;

    void validate() const;
};

struct NominalGains {
    double kp = 1.0;
    double kd = 2.0;
    double damping = 1e-2;
};

struct ControlDecision {
    Vec u;
    bool feasible = false;
    bool solver_failure = false;
    /// a . u - rhs for every barrier row, in barrier order.
    Vec constraint_margins;
    QpOutcome qp;
};

/// Goal-seeking policy that the filters project: P on the single integrator,
/// PD on the double integrator, damped-least-squares resolved rate on the arm.
Vec nominal_control(const SystemModel& model, const State& x, const Vec2& goal,
                    const NominalGains& gains = {});

/// Lg_h u >= -Lf_h - gamma h.
QpRow cbf_constraint_row(const Barrier& b, const SystemModel& model, const State& x, double gamma);

/// LgLf_h u >= -Lf2_h - (gamma1 + gamma2) hdot - gamma1 gamma2 h, i.e.
/// psi2 = psi1' + gamma2 psi1 >= 0 with psi1 = hdot + gamma1 h.
QpRow hocbf_constraint_row(const Barrier& b, const SystemModel& model, const State& x,
                           double gamma1, double gamma2);

/// h + dt (Lf_h + Lg_h u) >= 0.
QpRow naive_constraint_row_rd1(const Barrier& b, const SystemModel& model, const State& x, double dt);

/// h + T hdot + T^2/2 (Lf2_h + LgLf_h u) >= 0 over the horizon T = 2 dt.
QpRow naive_constraint_row_rd2(const Barrier& b, const SystemModel& model, const State& x, double dt);

/// The row that spec builds for b at x.
QpRow constraint_row(const FilterSpec& spec, const Barrier& b, const SystemModel& model, const State& x);

/// Rows for every barrier plus the box (or an unbounded box in ClampAfter mode).
QpProblem build_problem(const FilterSpec& spec, const SystemModel& model,
                        const std::vector<Barrier>& barriers, const State& x, const Vec& u_nom);

/// Minimum-deviation projection of u_nom. An empty admissible set (or a solver
/// breakdown) yields u = 0 with feasible = false.
ControlDecision filter(const FilterSpec& spec, const SystemModel& model,
                       const std::vector<Barrier>& barriers, const State& x, const Vec& u_nom);

}  // namespace cbfw
