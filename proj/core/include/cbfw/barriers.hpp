#pragma once

#include <optional>
#include <string_view>

#include "cbfw/models.hpp"

namespace cbfw {

enum class BarrierKind {
    Circle,         // ||p - c||^2 - r^2 on the robot position
    VelocityBound,  // v_max^2 - ||v||^2 (double integrator)
    Segment,        // dist(link_i(q), c)^2 - r^2 (manipulator)
    Wall,           // n.p - offset, the purely geometric half-plane
    ViabilityWall,  // n.p - offset - max(0, -n.v)^2 / (2 u_max), braking-aware half-plane
};

std::string_view to_string(BarrierKind kind);
std::optional<BarrierKind> parse_barrier_kind(std::string_view name);

/// Candidate barrier h with safe set {h >= 0}. Plain value type.
struct Barrier {
    BarrierKind kind = BarrierKind::Circle;
    Vec2 center = Vec2::Zero();
    double combined_radius = 0.0;  // obstacle radius + robot (or link capsule) radius
    double v_max = 0.0;
    int link_index = 0;
    Vec2 normal = Vec2::UnitX();
    double offset = 0.0;
    double u_max = 0.0;  // braking authority along the normal, viability wall only

    static Barrier circle(Vec2 center, double combined_radius);
    static Barrier velocity_bound(double v_max);
    static Barrier segment(int link_index, Vec2 center, double combined_radius);
    static Barrier wall(Vec2 normal, double offset);
    static Barrier viability_wall(Vec2 normal, double offset, double u_max);

    void validate() const;
};

/// Linear extended class-K function alpha(s) = gamma * s.
struct ClassKappa {
    double gamma = 1.0;

    explicit ClassKappa(double g);
    double operator()(double s) const { return gamma * s; }
};

struct LieData {
    double h = 0.0;
    Vec grad_h;
    double Lf_h = 0.0;
    Vec Lg_h;
};

/// Second-order terms: h'' = Lf2_h + LgLf_h . u along the double-integrator flow.
struct Hocbf2Data {
    double h = 0.0;
    double hdot = 0.0;
    double Lf2_h = 0.0;
    Vec LgLf_h;
};

/// Throws ContractViolation when b cannot be evaluated on model.
void require_compatible(const Barrier& b, const SystemModel& model);

/// Number of differentiations before u appears (1 or 2).
int relative_degree(const Barrier& b, const SystemModel& model);

double barrier_value(const Barrier& b, const SystemModel& model, const State& x);
Vec barrier_gradient(const Barrier& b, const SystemModel& model, const State& x);

/// Lf_h and Lg_h for a relative-degree-1 pairing.
LieData lie_derivatives(const Barrier& b, const SystemModel& model, const State& x);

/// Same computation without the relative-degree check. On degree-2 pairings
/// Lg_h is identically zero, which is what a first-order CBF test sees.
LieData first_order_terms(const Barrier& b, const SystemModel& model, const State& x);

/// Circle or wall barrier on the double integrator.
Hocbf2Data hocbf_terms(const Barrier& b, const SystemModel& model, const State& x);

/// Closest-point parameter in [0, 1] along segment (a, b) to point p.
double closest_parameter(const Vec2& a, const Vec2& b, const Vec2& p);

}  // namespace cbfw
