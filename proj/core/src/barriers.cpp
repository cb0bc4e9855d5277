#include "cbfw/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cbfw {

std::string_view to_string(BarrierKind kind)
{
    switch (kind) {
    case BarrierKind::Circle: return "circle";
    case BarrierKind::VelocityBound: return "velocity";
    case BarrierKind::Segment: return "segment";
    case BarrierKind::Wall: return "wall";
    case BarrierKind::ViabilityWall: return "viability-wall";
    }
    return "unknown";
}

std::optional<BarrierKind> parse_barrier_kind(std::string_view name)
{
    if (name == "circle") return BarrierKind::Circle;
    if (name == "velocity") return BarrierKind::VelocityBound;
    if (name == "segment") return BarrierKind::Segment;
    if (name == "wall") return BarrierKind::Wall;
    if (name == "viability-wall") return BarrierKind::ViabilityWall;
    return std::nullopt;
}

Barrier Barrier::circle(Vec2 center, double combined_radius)
{
    Barrier b;
    b.kind = BarrierKind::Circle;
    b.center = center;
    b.combined_radius = combined_radius;
    b.validate();
    return b;
}

Barrier Barrier::velocity_bound(double v_max)
{
    Barrier b;
    b.kind = BarrierKind::VelocityBound;
    b.v_max = v_max;
    b.validate();
    return b;
}

Barrier Barrier::segment(int link_index, Vec2 center, double combined_radius)
{
    Barrier b;
    b.kind = BarrierKind::Segment;
    b.link_index = link_index;
    b.center = center;
    b.combined_radius = combined_radius;
    b.validate();
    return b;
}

Barrier Barrier::wall(Vec2 normal, double offset)
{
    Barrier b;
    b.kind = BarrierKind::Wall;
    b.normal = normal.normalized();
    b.offset = offset;
    b.validate();
    return b;
}

Barrier Barrier::viability_wall(Vec2 normal, double offset, double u_max)
{
    Barrier b = wall(normal, offset);
    b.kind = BarrierKind::ViabilityWall;
    b.u_max = u_max;
    b.validate();
    return b;
}

void Barrier::validate() const
{
    switch (kind) {
    case BarrierKind::Circle:
    case BarrierKind::Segment:
        if (!(combined_radius > 0.0)) throw ContractViolation("combined_radius must be positive");
        if (!center.allFinite()) throw ContractViolation("obstacle center must be finite");
        if (kind == BarrierKind::Segment && (link_index < 0 || link_index > 2))
            throw ContractViolation("link_index must be 0, 1 or 2");
        break;
    case BarrierKind::VelocityBound:
        if (!(v_max > 0.0)) throw ContractViolation("v_max must be positive");
        break;
    case BarrierKind::ViabilityWall:
        if (!(u_max > 0.0)) throw ContractViolation("u_max must be positive");
        [[fallthrough]];
    case BarrierKind::Wall:
        if (!normal.allFinite() || std::abs(normal.norm() - 1.0) > 1e-12)
            throw ContractViolation("wall normal must be a finite nonzero vector");
        if (!std::isfinite(offset)) throw ContractViolation("wall offset must be finite");
        break;
    }
}

ClassKappa::ClassKappa(double g) : gamma(g)
{
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ContractViolation("gamma must be positive");
}

void require_compatible(const Barrier& b, const SystemModel& model)
{
    bool ok = false;
    switch (b.kind) {
    case BarrierKind::Circle:
    case BarrierKind::Wall:
        ok = model.kind != SystemKind::Manipulator3;
        break;
    case BarrierKind::VelocityBound:
    case BarrierKind::ViabilityWall:
        ok = model.kind == SystemKind::DoubleIntegrator;
        break;
    case BarrierKind::Segment:
        ok = model.kind == SystemKind::Manipulator3;
        break;
    }
    if (!ok)
        throw ContractViolation(std::string(to_string(b.kind)) + " barrier is not defined on " +
                                std::string(to_string(model.kind)));
}

int relative_degree(const Barrier& b, const SystemModel& model)
{
    require_compatible(b, model);
    const bool position_only = b.kind == BarrierKind::Circle || b.kind == BarrierKind::Wall;
    return (position_only && model.kind == SystemKind::DoubleIntegrator) ? 2 : 1;
}

double closest_parameter(const Vec2& a, const Vec2& b, const Vec2& p)
{
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 <= 0.0) return 0.0;
    return std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
}

namespace {

struct SegmentGeometry {
    Vec2 closest;
    double t;
};

SegmentGeometry closest_on_link(const Barrier& b, const SystemModel& model, const State& q)
{
    const auto joints = joint_positions(model, q);
    const Vec2& a = joints[b.link_index];
    const Vec2& c = joints[b.link_index + 1];
    const double t = closest_parameter(a, c, b.center);
    return {a + t * (c - a), t};
}

}  // namespace

double barrier_value(const Barrier& b, const SystemModel& model, const State& x)
{
    require_compatible(b, model);
    require_state(model, x);
    const double r2 = b.combined_radius * b.combined_radius;
    switch (b.kind) {
    case BarrierKind::Circle:
        return (x.head<2>() - b.center).squaredNorm() - r2;
    case BarrierKind::VelocityBound:
        return b.v_max * b.v_max - x.tail<2>().squaredNorm();
    case BarrierKind::Segment:
        return (closest_on_link(b, model, x).closest - b.center).squaredNorm() - r2;
    case BarrierKind::Wall:
        return b.normal.dot(x.head<2>()) - b.offset;
    case BarrierKind::ViabilityWall: {
        const double closing = std::max(0.0, -b.normal.dot(x.tail<2>()));
        return b.normal.dot(x.head<2>()) - b.offset - closing * closing / (2.0 * b.u_max);
    }
    }
    return 0.0;
}

Vec barrier_gradient(const Barrier& b, const SystemModel& model, const State& x)
{
    require_compatible(b, model);
    require_state(model, x);
    Vec grad = Vec::Zero(model.state_dim);
    switch (b.kind) {
    case BarrierKind::Circle:
        grad.head<2>() = 2.0 * (x.head<2>() - b.center);
        break;
    case BarrierKind::VelocityBound:
        grad.tail<2>() = -2.0 * x.tail<2>();
        break;
    case BarrierKind::Segment: {
        // Envelope argument: with t held at its optimum (or its clamp), the
        // closest point moves like (1 - t) joint_i + t joint_{i+1}.
        const auto geo = closest_on_link(b, model, x);
        const auto ja = joint_jacobian(model, x, b.link_index);
        const auto jb = joint_jacobian(model, x, b.link_index + 1);
        grad = 2.0 * ((1.0 - geo.t) * ja + geo.t * jb).transpose() * (geo.closest - b.center);
        break;
    }
    case BarrierKind::Wall:
        grad.head<2>() = b.normal;
        break;
    case BarrierKind::ViabilityWall: {
        grad.head<2>() = b.normal;
        const double closing = std::max(0.0, -b.normal.dot(x.tail<2>()));
        grad.tail<2>() = (closing / b.u_max) * b.normal;
        break;
    }
    }
    return grad;
}

LieData first_order_terms(const Barrier& b, const SystemModel& model, const State& x)
{
    LieData d;
    d.h = barrier_value(b, model, x);
    d.grad_h = barrier_gradient(b, model, x);
    d.Lf_h = d.grad_h.dot(drift(model, x));
    d.Lg_h = actuation(model, x).transpose() * d.grad_h;
    return d;
}

LieData lie_derivatives(const Barrier& b, const SystemModel& model, const State& x)
{
    if (relative_degree(b, model) != 1)
        throw ContractViolation("relative degree 2 pairing: use hocbf_terms");
    return first_order_terms(b, model, x);
}

Hocbf2Data hocbf_terms(const Barrier& b, const SystemModel& model, const State& x)
{
    if (relative_degree(b, model) != 2)
        throw ContractViolation("hocbf_terms needs a relative degree 2 pairing");
    const Vec2 p = x.head<2>();
    const Vec2 v = x.tail<2>();
    Hocbf2Data d;
    d.h = barrier_value(b, model, x);
    if (b.kind == BarrierKind::Circle) {
        d.hdot = 2.0 * (p - b.center).dot(v);
        d.Lf2_h = 2.0 * v.squaredNorm();
        d.LgLf_h = 2.0 * (p - b.center);
    } else {
        d.hdot = b.normal.dot(v);
        d.Lf2_h = 0.0;
        d.LgLf_h = b.normal;
    }
    return d;
}

}  // namespace cbfw
