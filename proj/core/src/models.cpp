#include "cbfw/models.hpp"

#include <cmath>
#include <string>

namespace cbfw {

std::string_view to_string(SystemKind kind)
{
    switch (kind) {
    case SystemKind::SingleIntegrator: return "single-integrator";
    case SystemKind::DoubleIntegrator: return "double-integrator";
    case SystemKind::Manipulator3: return "manipulator";
    }
    return "unknown";
}

std::optional<SystemKind> parse_system_kind(std::string_view name)
{
    if (name == "single-integrator" || name == "si") return SystemKind::SingleIntegrator;
    if (name == "double-integrator" || name == "di") return SystemKind::DoubleIntegrator;
    if (name == "manipulator" || name == "planar-manipulator-3dof") return SystemKind::Manipulator3;
    return std::nullopt;
}

SystemModel SystemModel::single_integrator(double u_max)
{
    SystemModel m;
    m.kind = SystemKind::SingleIntegrator;
    m.state_dim = 2;
    m.input_dim = 2;
    m.input_box = Vec::Constant(2, u_max);
    m.validate();
    return m;
}

SystemModel SystemModel::double_integrator(double a_max, double v_max)
{
    SystemModel m;
    m.kind = SystemKind::DoubleIntegrator;
    m.state_dim = 4;
    m.input_dim = 2;
    m.input_box = Vec::Constant(2, a_max);
    m.v_max = v_max;
    m.validate();
    return m;
}

SystemModel SystemModel::manipulator(double omega_max, std::array<double, 3> links, Vec2 base)
{
    SystemModel m;
    m.kind = SystemKind::Manipulator3;
    m.state_dim = 3;
    m.input_dim = 3;
    m.input_box = Vec::Constant(3, omega_max);
    m.link_lengths = links;
    m.base = base;
    m.validate();
    return m;
}

void SystemModel::validate() const
{
    const auto expect = [&](int n, int m) {
        if (state_dim != n || input_dim != m)
            throw ContractViolation(std::string(to_string(kind)) + ": wrong state/input dimension");
    };
    switch (kind) {
    case SystemKind::SingleIntegrator: expect(2, 2); break;
    case SystemKind::DoubleIntegrator: expect(4, 2); break;
    case SystemKind::Manipulator3: expect(3, 3); break;
    }
    if (input_box.size() != input_dim)
        throw ContractViolation("input_box size must equal input_dim");
    for (int i = 0; i < input_box.size(); ++i)
        if (!(input_box[i] > 0.0))
            throw ContractViolation("input_box entries must be strictly positive");
    if (kind == SystemKind::DoubleIntegrator && !(v_max > 0.0))
        throw ContractViolation("double integrator needs v_max > 0");
    if (kind == SystemKind::Manipulator3)
        for (double l : link_lengths)
            if (!(l > 0.0)) throw ContractViolation("link lengths must be positive");
}

void SimConfig::validate() const
{
    if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
    if (max_steps <= 0) throw ContractViolation("max_steps must be positive");
    if (!(goal_tolerance > 0.0)) throw ContractViolation("goal_tolerance must be positive");
}

void require_state(const SystemModel& model, const State& x)
{
    if (x.size() != model.state_dim)
        throw ContractViolation("state dimension mismatch for " + std::string(to_string(model.kind)));
    if (!x.allFinite()) throw ContractViolation("state has non-finite entries");
}

void require_input(const SystemModel& model, const Vec& u)
{
    if (u.size() != model.input_dim)
        throw ContractViolation("input dimension mismatch for " + std::string(to_string(model.kind)));
    if (!u.allFinite()) throw ContractViolation("input has non-finite entries");
}

Vec drift(const SystemModel& model, const State& x)
{
    require_state(model, x);
    Vec f = Vec::Zero(model.state_dim);
    if (model.kind == SystemKind::DoubleIntegrator) f.head<2>() = x.tail<2>();
    return f;
}

Mat actuation(const SystemModel& model, const State& x)
{
    require_state(model, x);
    if (model.kind == SystemKind::DoubleIntegrator) {
        Mat g = Mat::Zero(4, 2);
        g(2, 0) = 1.0;
        g(3, 1) = 1.0;
        return g;
    }
    return Mat::Identity(model.state_dim, model.input_dim);
}

State step(const SystemModel& model, const State& x, const Vec& u, double dt)
{
    require_input(model, u);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractViolation("dt must be positive and finite");
    // Written out per kind so that u = 0 leaves driftless states bit-identical.
    State next = x;
    switch (model.kind) {
    case SystemKind::SingleIntegrator:
    case SystemKind::Manipulator3:
        require_state(model, x);
        next += dt * u;
        break;
    case SystemKind::DoubleIntegrator:
        require_state(model, x);
        next.head<2>() += dt * x.tail<2>();
        next.tail<2>() += dt * u;
        break;
    }
    return next;
}

Vec clamp_input(const SystemModel& model, const Vec& u)
{
    if (u.size() != model.input_dim) throw ContractViolation("input dimension mismatch");
    return u.cwiseMax(-model.input_box).cwiseMin(model.input_box);
}

std::array<Vec2, 4> joint_positions(const SystemModel& model, const State& q)
{
    if (model.kind != SystemKind::Manipulator3)
        throw ContractViolation("forward kinematics requires the manipulator model");
    require_state(model, q);
    std::array<Vec2, 4> joints;
    joints[0] = model.base;
    double angle = 0.0;
    for (int i = 0; i < 3; ++i) {
        angle += q[i];
        joints[i + 1] = joints[i] + model.link_lengths[i] * Vec2(std::cos(angle), std::sin(angle));
    }
    return joints;
}

std::array<Segment, 3> forward_kinematics(const SystemModel& model, const State& q)
{
    const auto j = joint_positions(model, q);
    return {Segment{j[0], j[1]}, Segment{j[1], j[2]}, Segment{j[2], j[3]}};
}

Eigen::Matrix<double, 2, 3> joint_jacobian(const SystemModel& model, const State& q, int k)
{
    if (model.kind != SystemKind::Manipulator3)
        throw ContractViolation("joint jacobian requires the manipulator model");
    if (k < 0 || k > 3) throw ContractViolation("joint index out of range");
    require_state(model, q);

    // Joint k sits at base + sum_{i<k} L_i (cos th_i, sin th_i), th_i = q_0 + ... + q_i.
    // Column m collects the links i >= m that lie before joint k.
    std::array<Vec2, 3> dlink;
    double angle = 0.0;
    for (int i = 0; i < 3; ++i) {
        angle += q[i];
        dlink[i] = model.link_lengths[i] * Vec2(-std::sin(angle), std::cos(angle));
    }
    Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
    for (int m = 0; m < 3; ++m)
        for (int i = m; i < k; ++i) jac.col(m) += dlink[i];
    return jac;
}

Vec2 task_position(const SystemModel& model, const State& x)
{
    require_state(model, x);
    if (model.kind == SystemKind::Manipulator3) return joint_positions(model, x)[3];
    return x.head<2>();
}

}  // namespace cbfw
