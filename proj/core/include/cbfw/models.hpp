#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string_view>

#include <Eigen/Dense>

namespace cbfw {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using State = Eigen::VectorXd;

/// Raised when a caller breaks an operation's precondition (wrong dimensions,
/// incompatible model/barrier pairing, non-finite data).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class SystemKind { SingleIntegrator, DoubleIntegrator, Manipulator3 };

std::string_view to_string(SystemKind kind);
std::optional<SystemKind> parse_system_kind(std::string_view name);

/**
 * Control-affine model x' = f(x) + g(x) u with a symmetric per-axis input box.
 *
 * State layouts:
 *  - single integrator: (p_x, p_y)
 *  - double integrator: (p_x, p_y, v_x, v_y)
 *  - planar 3-link arm (kinematic): (q_1, q_2, q_3), joint angles relative to
 *    the previous link, so link i points along q_1 + ... + q_i.
 */
struct SystemModel {
    SystemKind kind = SystemKind::SingleIntegrator;
    int state_dim = 2;
    int input_dim = 2;
    Vec input_box;

    // Planar arm geometry, unused by the point-robot kinds.
    std::array<double, 3> link_lengths{1.33, 1.16, 0.83};
    Vec2 base{5.0, 0.0};

    // Speed envelope of the double integrator. Enforced by the filter through
    // a velocity barrier, never by clamping the state.
    double v_max = 0.0;

    static SystemModel single_integrator(double u_max = 5.0);
    static SystemModel double_integrator(double a_max = 5.0, double v_max = 2.0);
    static SystemModel manipulator(double omega_max = 2.0,
                                   std::array<double, 3> links = {1.33, 1.16, 0.83},
                                   Vec2 base = Vec2(5.0, 0.0));

    bool driftless() const { return kind != SystemKind::DoubleIntegrator; }
    double reach() const { return link_lengths[0] + link_lengths[1] + link_lengths[2]; }

    /// Throws ContractViolation when the invariants of the kind do not hold.
    void validate() const;
};

struct SimConfig {
    double dt = 0.01;
    int max_steps = 3000;
    double goal_tolerance = 0.1;

    void validate() const;
};

void require_state(const SystemModel& model, const State& x);
void require_input(const SystemModel& model, const Vec& u);

Vec drift(const SystemModel& model, const State& x);
Mat actuation(const SystemModel& model, const State& x);

/// One explicit-Euler step x + dt (f(x) + g(x) u).
State step(const SystemModel& model, const State& x, const Vec& u, double dt);

/// Per-axis projection onto the input box.
Vec clamp_input(const SystemModel& model, const Vec& u);

struct Segment {
    Vec2 a;
    Vec2 b;
};

/// Joint positions of the arm, base first and end-effector last.
std::array<Vec2, 4> joint_positions(const SystemModel& model, const State& q);

/// Link segments of the arm in the workspace frame.
std::array<Segment, 3> forward_kinematics(const SystemModel& model, const State& q);

/// d(joint k position)/dq as a 2x3 matrix; k = 0 is the base, k = 3 the end-effector.
Eigen::Matrix<double, 2, 3> joint_jacobian(const SystemModel& model, const State& q, int k);

/// Workspace point the task refers to: the robot center, or the arm's end-effector.
Vec2 task_position(const SystemModel& model, const State& x);

}  // namespace cbfw
