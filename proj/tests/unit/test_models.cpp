#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "cbfw/models.hpp"
#include "cbfw/rng.hpp"
#include "oracles.hpp"

using namespace cbfw;

namespace {

Vec v(std::initializer_list<double> xs)
{
    Vec out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}

State random_state(const SystemModel& m, Rng& rng)
{
    State x(m.state_dim);
    for (int i = 0; i < m.state_dim; ++i) x[i] = rng.uniform(-10.0, 10.0);
    return x;
}

Vec random_input(const SystemModel& m, Rng& rng)
{
    Vec u(m.input_dim);
    for (int i = 0; i < m.input_dim; ++i) u[i] = rng.uniform(-m.input_box[i], m.input_box[i]);
    return u;
}

}  // namespace

TEST(Models, DimensionsAndBoxes)
{
    const auto si = SystemModel::single_integrator();
    const auto di = SystemModel::double_integrator();
    const auto arm = SystemModel::manipulator();
    EXPECT_EQ(si.state_dim, 2);
    EXPECT_EQ(si.input_dim, 2);
    EXPECT_EQ(di.state_dim, 4);
    EXPECT_EQ(di.input_dim, 2);
    EXPECT_EQ(arm.state_dim, 3);
    EXPECT_EQ(arm.input_dim, 3);
    EXPECT_DOUBLE_EQ(arm.link_lengths[0], 1.33);
    EXPECT_DOUBLE_EQ(arm.link_lengths[1], 1.16);
    EXPECT_DOUBLE_EQ(arm.link_lengths[2], 0.83);
    for (const auto* m : {&si, &di, &arm})
        for (Eigen::Index i = 0; i < m->input_box.size(); ++i) EXPECT_GT(m->input_box[i], 0.0);
    EXPECT_THROW(SystemModel::single_integrator(0.0), ContractViolation);
    EXPECT_THROW(SystemModel::double_integrator(5.0, -1.0), ContractViolation);
}

TEST(Models, KindNames)
{
    EXPECT_EQ(parse_system_kind("single-integrator"), SystemKind::SingleIntegrator);
    EXPECT_EQ(parse_system_kind("double-integrator"), SystemKind::DoubleIntegrator);
    EXPECT_EQ(parse_system_kind("planar-manipulator-3dof"), SystemKind::Manipulator3);
    EXPECT_FALSE(parse_system_kind("unicycle"));
}

TEST(Models, DriftExamples)
{
    EXPECT_EQ(drift(SystemModel::single_integrator(), v({3, 1})), v({0, 0}));
    EXPECT_EQ(drift(SystemModel::double_integrator(), v({0, 0, -1, 2})), v({-1, 2, 0, 0}));
    EXPECT_EQ(drift(SystemModel::manipulator(), v({0.1, 0.2, 0.3})), v({0, 0, 0}));
}

TEST(Models, ActuationExamples)
{
    EXPECT_EQ(actuation(SystemModel::single_integrator(), v({7, -2})), Mat::Identity(2, 2));
    EXPECT_EQ(actuation(SystemModel::manipulator(), v({1, 2, 3})), Mat::Identity(3, 3));
    Mat g(4, 2);
    g << 0, 0, 0, 0, 1, 0, 0, 1;
    EXPECT_EQ(actuation(SystemModel::double_integrator(), v({1, 2, 3, 4})), g);
}

TEST(Models, DimensionMismatchIsContractViolation)
{
    const auto si = SystemModel::single_integrator();
    EXPECT_THROW(drift(si, v({1, 2, 3})), ContractViolation);
    EXPECT_THROW(actuation(SystemModel::double_integrator(), v({1, 2})), ContractViolation);
    EXPECT_THROW(step(si, v({0, 0}), v({1}), 0.01), ContractViolation);
}

TEST(Models, StepExamples)
{
    EXPECT_EQ(step(SystemModel::single_integrator(), v({0, 0}), v({1, 0}), 0.01), v({0.01, 0}));
    EXPECT_EQ(step(SystemModel::double_integrator(), v({0, 0, 1, 0}), v({0, 0}), 0.01), v({0.01, 0, 1, 0}));
    const State x = step(SystemModel::double_integrator(), v({0, 0, 0, 0}), v({5, 0}), 0.01);
    EXPECT_NEAR((x - v({0, 0, 0.05, 0})).norm(), 0.0, 1e-15);
}

TEST(Models, StepRejectsNonFiniteData)
{
    const auto si = SystemModel::single_integrator();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(step(si, v({nan, 0}), v({0, 0}), 0.01), ContractViolation);
    EXPECT_THROW(step(si, v({0, 0}), v({0, std::numeric_limits<double>::infinity()}), 0.01), ContractViolation);
    EXPECT_THROW(step(si, v({0, 0}), v({0, 0}), 0.0), ContractViolation);
}

TEST(Models, DriftlessKindsHaveZeroDrift)
{
    Rng rng(1);
    for (const auto& m : {SystemModel::single_integrator(), SystemModel::manipulator()})
        for (int i = 0; i < 1000; ++i) EXPECT_EQ(drift(m, random_state(m, rng)).norm(), 0.0);
}

TEST(Models, ZeroInputLeavesDriftlessStatesBitExact)
{
    Rng rng(2);
    for (const auto& m : {SystemModel::single_integrator(), SystemModel::manipulator()}) {
        for (int i = 0; i < 1000; ++i) {
            const State x = random_state(m, rng);
            const State y = step(m, x, Vec::Zero(m.input_dim), 0.01);
            for (Eigen::Index k = 0; k < x.size(); ++k) EXPECT_EQ(x[k], y[k]);
        }
    }
}

TEST(Models, EulerMatchesDefinitionExactly)
{
    Rng rng(3);
    for (const auto& m : {SystemModel::single_integrator(), SystemModel::double_integrator(), SystemModel::manipulator()}) {
        for (int i = 0; i < 200; ++i) {
            const State x = random_state(m, rng);
            const Vec u = random_input(m, rng);
            const State expect = x + 0.01 * oracle::vector_field(m, x, u);
            EXPECT_LE((step(m, x, u, 0.01) - expect).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

// Local error against a fine RK4 reference is O(dt^2): halving dt cuts it ~4x.
TEST(Models, EulerAgainstRk4IsSecondOrderLocally)
{
    Rng rng(4);
    const auto di = SystemModel::double_integrator();
    for (int i = 0; i < 100; ++i) {
        const State x = random_state(di, rng);
        const Vec u = random_input(di, rng);
        const double e1 = (step(di, x, u, 0.02) - oracle::rk4(di, x, u, 0.02)).norm();
        const double e2 = (step(di, x, u, 0.01) - oracle::rk4(di, x, u, 0.01)).norm();
        // Exact local error is dt^2 |u| / 2 in position.
        EXPECT_NEAR(e2, 0.5 * 0.01 * 0.01 * u.norm(), 1e-12);
        if (u.norm() > 0.1) EXPECT_NEAR(e1 / e2, 4.0, 1e-6);
    }
    // Driftless systems under constant input: Euler is exact.
    const auto si = SystemModel::single_integrator();
    for (int i = 0; i < 100; ++i) {
        const State x = random_state(si, rng);
        const Vec u = random_input(si, rng);
        EXPECT_LE((step(si, x, u, 0.01) - oracle::rk4(si, x, u, 0.01)).norm(), 1e-12);
    }
}

TEST(Models, ClampExamples)
{
    const auto si = SystemModel::single_integrator();
    EXPECT_EQ(clamp_input(si, v({3, -2})), v({3, -2}));
    EXPECT_EQ(clamp_input(si, v({7, -9})), v({5, -5}));
    EXPECT_EQ(clamp_input(SystemModel::manipulator(2.0), v({0, 2.0001, -1})), v({0, 2, -1}));
}

TEST(Models, ClampIsTheEuclideanProjection)
{
    Rng rng(5);
    const auto si = SystemModel::single_integrator(2.0);
    for (int i = 0; i < 200; ++i) {
        const Vec u = v({rng.uniform(-6, 6), rng.uniform(-6, 6)});
        const Vec c = clamp_input(si, u);
        EXPECT_EQ(clamp_input(si, c), c);
        // Brute force over a box grid: nothing closer than the clamp.
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a <= 200; ++a)
            for (int b = 0; b <= 200; ++b) best = std::min(best, (v({-2 + 0.02 * a, -2 + 0.02 * b}) - u).norm());
        EXPECT_LE((c - u).norm(), best + 1e-12);
    }
}

TEST(Models, ForwardKinematicsExamples)
{
    const auto arm = SystemModel::manipulator();
    const Vec2 base = arm.base;
    auto seg = forward_kinematics(arm, v({0, 0, 0}));
    EXPECT_NEAR((seg[0].a - base).norm(), 0.0, 1e-15);
    EXPECT_NEAR((seg[0].b - (base + Vec2(1.33, 0))).norm(), 0.0, 1e-12);
    EXPECT_NEAR((seg[1].b - (base + Vec2(2.49, 0))).norm(), 0.0, 1e-12);
    EXPECT_NEAR((seg[2].b - (base + Vec2(3.32, 0))).norm(), 0.0, 1e-12);

    const double h = std::numbers::pi / 2;
    seg = forward_kinematics(arm, v({h, 0, 0}));
    EXPECT_NEAR((seg[2].b - (base + Vec2(0, 3.32))).norm(), 0.0, 1e-12);

    seg = forward_kinematics(arm, v({h, -h, 0}));
    EXPECT_NEAR((seg[0].b - (base + Vec2(0, 1.33))).norm(), 0.0, 1e-12);
    EXPECT_NEAR((seg[1].b - (base + Vec2(1.16, 1.33))).norm(), 0.0, 1e-12);
    EXPECT_NEAR((seg[2].b - (base + Vec2(1.99, 1.33))).norm(), 0.0, 1e-12);

    EXPECT_THROW(forward_kinematics(SystemModel::single_integrator(), v({0, 0})), ContractViolation);
}

TEST(Models, KinematicChainIsContinuousAndRigid)
{
    Rng rng(6);
    const auto arm = SystemModel::manipulator();
    EXPECT_NEAR(arm.reach(), 3.32, 1e-12);
    for (int i = 0; i < 1000; ++i) {
        const State q = random_state(arm, rng);
        const auto seg = forward_kinematics(arm, q);
        EXPECT_EQ(seg[0].b, seg[1].a);
        EXPECT_EQ(seg[1].b, seg[2].a);
        for (int k = 0; k < 3; ++k)
            EXPECT_NEAR((seg[k].b - seg[k].a).norm(), arm.link_lengths[static_cast<std::size_t>(k)], 1e-12);
        // Cumulative angles: link k points along q_1 + ... + q_k.
        double angle = 0;
        for (int k = 0; k < 3; ++k) {
            angle += q[k];
            const Vec2 d = (seg[k].b - seg[k].a).normalized();
            EXPECT_NEAR(d.x(), std::cos(angle), 1e-12);
            EXPECT_NEAR(d.y(), std::sin(angle), 1e-12);
        }
    }
}

TEST(Models, JointJacobianMatchesFiniteDifferences)
{
    Rng rng(7);
    const auto arm = SystemModel::manipulator();
    for (int i = 0; i < 200; ++i) {
        const State q = random_state(arm, rng);
        for (int k = 0; k < 4; ++k) {
            const auto J = joint_jacobian(arm, q, k);
            for (int axis = 0; axis < 2; ++axis) {
                const Vec fd = oracle::gradient(
                    [&](const State& s) { return joint_positions(arm, s)[static_cast<std::size_t>(k)][axis]; }, q);
                EXPECT_LE((J.row(axis).transpose() - fd).norm(), 1e-7);
            }
        }
    }
}

TEST(Models, SimConfigValidation)
{
    SimConfig c;
    EXPECT_NO_THROW(c.validate());
    c.dt = 0;
    EXPECT_THROW(c.validate(), ContractViolation);
    c = {};
    c.max_steps = 0;
    EXPECT_THROW(c.validate(), ContractViolation);
    c = {};
    c.goal_tolerance = 0;
    EXPECT_THROW(c.validate(), ContractViolation);
}
