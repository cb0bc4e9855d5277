#include "cbfw/filters.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cbfw {

std::string_view to_string(FilterFamily family)
{
    switch (family) {
    case FilterFamily::Cbf: return "cbf";
    case FilterFamily::Hocbf: return "hocbf";
    case FilterFamily::Naive: return "naive";
    }
    return "unknown";
}

std::optional<FilterFamily> parse_filter_family(std::string_view name)
{
    if (name == "cbf") return FilterFamily::Cbf;
    if (name == "hocbf") return FilterFamily::Hocbf;
    if (name == "naive" || name == "naive-rd1" || name == "naive-rd2") return FilterFamily::Naive;
    return std::nullopt;
}

std::string_view to_string(InputBounds bounds)
{
    return bounds == InputBounds::InQp ? "in-qp" : "clamp-after";
}

std::optional<InputBounds> parse_input_bounds(std::string_view name)
{
    if (name == "in-qp") return InputBounds::InQp;
    if (name == "clamp-after") return InputBounds::ClampAfter;
    return std::nullopt;
}

InputBounds default_input_bounds(FilterFamily family)
{
    return family == FilterFamily::Naive ? InputBounds::ClampAfter : InputBounds::InQp;
}

void FilterSpec::validate() const
{
    const auto positive = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ContractViolation(std::string(what) + " must be positive");
    };
    switch (family) {
    case FilterFamily::Cbf: positive(gamma, "gamma"); break;
    case FilterFamily::Hocbf:
        positive(gamma1, "gamma1");
        positive(gamma2, "gamma2");
        break;
    case FilterFamily::Naive: break;
    }
    positive(dt, "dt");
}

Vec nominal_control(const SystemModel& model, const State& x, const Vec2& goal, const NominalGains& gains)
{
    require_state(model, x);
    Vec u;
    switch (model.kind) {
    case SystemKind::SingleIntegrator:
        u = gains.kp * (goal - x.head<2>());
        break;
    case SystemKind::DoubleIntegrator:
    {
        // Velocity-tracking PD: steer toward the goal at up to v_max.
        Vec2 v_des = gains.kp * (goal - x.head<2>());
        const double speed = v_des.norm();
        if (speed > model.v_max) v_des *= model.v_max / speed;
        u = gains.kd * (v_des - x.tail<2>());
    }
        break;
    case SystemKind::Manipulator3: {
        const Eigen::Matrix<double, 2, 3> jac = joint_jacobian(model, x, 3);
        const Vec2 err = gains.kp * (goal - joint_positions(model, x)[3]);
        const Eigen::Matrix2d jjt = jac * jac.transpose() + gains.damping * Eigen::Matrix2d::Identity();
        u = jac.transpose() * jjt.ldlt().solve(err);
        break;
    }
    }
    return clamp_input(model, u);
}

QpRow cbf_constraint_row(const Barrier& b, const SystemModel& model, const State& x, double gamma)
{
    const ClassKappa alpha(gamma);
    const LieData d = lie_derivatives(b, model, x);
    return {d.Lg_h, -d.Lf_h - alpha(d.h)};
}

QpRow hocbf_constraint_row(const Barrier& b, const SystemModel& model, const State& x,
                           double gamma1, double gamma2)
{
    const ClassKappa a1(gamma1);
    const ClassKappa a2(gamma2);
    const Hocbf2Data d = hocbf_terms(b, model, x);
    return {d.LgLf_h, -d.Lf2_h - (a1.gamma + a2.gamma) * d.hdot - a1.gamma * a2.gamma * d.h};
}

QpRow naive_constraint_row_rd1(const Barrier& b, const SystemModel& model, const State& x, double dt)
{
    if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
    const LieData d = lie_derivatives(b, model, x);
    return {dt * d.Lg_h, -d.h - dt * d.Lf_h};
}

QpRow naive_constraint_row_rd2(const Barrier& b, const SystemModel& model, const State& x, double dt)
{
    if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
    const Hocbf2Data d = hocbf_terms(b, model, x);
    const double horizon = 2.0 * dt;
    const double half_t2 = 0.5 * horizon * horizon;
    return {half_t2 * d.LgLf_h, -d.h - horizon * d.hdot - half_t2 * d.Lf2_h};
}

QpRow constraint_row(const FilterSpec& spec, const Barrier& b, const SystemModel& model, const State& x)
{
    const int degree = relative_degree(b, model);
    switch (spec.family) {
    case FilterFamily::Cbf:
        return cbf_constraint_row(b, model, x, spec.gamma);
    case FilterFamily::Hocbf:
        return degree == 2 ? hocbf_constraint_row(b, model, x, spec.gamma1, spec.gamma2)
                           : cbf_constraint_row(b, model, x, spec.gamma1);
    case FilterFamily::Naive:
        return degree == 2 ? naive_constraint_row_rd2(b, model, x, spec.dt)
                           : naive_constraint_row_rd1(b, model, x, spec.dt);
    }
    throw ContractViolation("unknown filter family");
}

QpProblem build_problem(const FilterSpec& spec, const SystemModel& model,
                        const std::vector<Barrier>& barriers, const State& x, const Vec& u_nom)
{
    spec.validate();
    require_state(model, x);
    require_input(model, u_nom);
    QpProblem p;
    p.u_nom = u_nom;
    p.rows.reserve(barriers.size());
    for (const auto& b : barriers) p.rows.push_back(constraint_row(spec, b, model, x));
    p.box = spec.bounds == InputBounds::InQp
                ? model.input_box
                : Vec::Constant(model.input_dim, std::numeric_limits<double>::infinity());
    return p;
}

ControlDecision filter(const FilterSpec& spec, const SystemModel& model,
                       const std::vector<Barrier>& barriers, const State& x, const Vec& u_nom)
{
    const QpProblem p = build_problem(spec, model, barriers, x, u_nom);
    ControlDecision d;
    d.qp = solve(p);
    d.feasible = d.qp.optimal();
    d.solver_failure = d.qp.status == QpStatus::SolverFailure;
    d.u = d.feasible ? d.qp.u_star : Vec::Zero(model.input_dim);
    if (d.feasible && spec.bounds == InputBounds::ClampAfter) {
        // Saturate along the ray to the origin: any row satisfied by both u
        // and 0 stays satisfied.
        const double over = (d.u.cwiseAbs().array() / model.input_box.array()).maxCoeff();
        if (over > 1.0) d.u /= over;
    }
    d.constraint_margins.resize(static_cast<Eigen::Index>(p.rows.size()));
    for (std::size_t i = 0; i < p.rows.size(); ++i)
        d.constraint_margins[static_cast<Eigen::Index>(i)] = p.rows[i].a.dot(d.u) - p.rows[i].b;
    return d;
}

}  // namespace cbfw
