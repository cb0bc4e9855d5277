#include "cbfw/world.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cbfw/rng.hpp"

namespace cbfw {

bool Workspace::contains(const Vec2& p, double inset) const
{
    return p.x() >= lo.x() + inset && p.x() <= hi.x() - inset && p.y() >= lo.y() + inset &&
           p.y() <= hi.y() - inset;
}

namespace {

Vec2 uniform_point(Rng& rng, const Workspace& ws, double inset)
{
    const double x = rng.uniform(ws.lo.x() + inset, ws.hi.x() - inset);
    const double y = rng.uniform(ws.lo.y() + inset, ws.hi.y() - inset);
    return {x, y};
}

double clearance_to(const Obstacle& o, const SystemModel& model, const State& x, double robot_radius)
{
    // Computed from the barrier value so that sign(clearance) == sign(h) exactly:
    // d - r = (d^2 - r^2) / (d + r).
    const double combined = o.radius + robot_radius;
    const auto from_h = [combined](double h) {
        return h / (std::sqrt(std::max(0.0, h + combined * combined)) + combined);
    };
    if (model.kind != SystemKind::Manipulator3)
        return from_h(barrier_value(Barrier::circle(o.center, combined), model, x));
    double best = std::numeric_limits<double>::infinity();
    for (int link = 0; link < 3; ++link)
        best = std::min(best, from_h(barrier_value(Barrier::segment(link, o.center, combined), model, x)));
    return best;
}

State sample_start(Rng& rng, const SystemModel& model, const Workspace& ws, double robot_radius)
{
    switch (model.kind) {
    case SystemKind::SingleIntegrator:
        return uniform_point(rng, ws, robot_radius);
    case SystemKind::DoubleIntegrator: {
        State x = State::Zero(4);
        x.head<2>() = uniform_point(rng, ws, robot_radius);
        return x;
    }
    case SystemKind::Manipulator3: {
        constexpr double pi = std::numbers::pi;
        State q(3);
        q[0] = rng.uniform(0.0, pi);
        q[1] = rng.uniform(-2.0 * pi / 3.0, 2.0 * pi / 3.0);
        q[2] = rng.uniform(-2.0 * pi / 3.0, 2.0 * pi / 3.0);
        return q;
    }
    }
    return {};
}

Vec2 sample_goal(Rng& rng, const SystemModel& model, const Workspace& ws, double robot_radius)
{
    if (model.kind != SystemKind::Manipulator3) return uniform_point(rng, ws, robot_radius);
    // Upper half of the reachable annulus around the base.
    const double inner = 0.5;
    const double outer = 0.95 * model.reach();
    const double r = std::sqrt(rng.uniform(inner * inner, outer * outer));
    const double theta = rng.uniform(0.0, std::numbers::pi);
    return model.base + r * Vec2(std::cos(theta), std::sin(theta));
}

}  // namespace

std::string_view to_string(ObstacleLayout layout)
{
    return layout == ObstacleLayout::Uniform ? "uniform" : "corridor";
}

ObstacleLayout parse_obstacle_layout(std::string_view name)
{
    if (name == "uniform") return ObstacleLayout::Uniform;
    if (name == "corridor") return ObstacleLayout::Corridor;
    throw std::invalid_argument("unknown obstacle layout: " + std::string(name));
}

Environment sample_environment(std::uint64_t seed, const SystemModel& model, const WorldParams& params)
{
    model.validate();
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(model.kind)}));
    Environment env;
    env.kind = model.kind;
    env.seed = seed;
    env.robot_radius = params.robot_radius;

    int attempts = 0;
    const auto spend = [&] {
        if (++attempts > params.max_attempts)
            throw GenerationError("environment rejection cap exceeded for seed " + std::to_string(seed));
    };

    env.start = sample_start(rng, model, env.workspace, env.robot_radius);
    if (model.kind == SystemKind::Manipulator3) {
        // The arm must stay inside the field at its start pose.
        while (true) {
            bool inside = true;
            for (const auto& j : joint_positions(model, env.start))
                inside = inside && env.workspace.contains(j);
            if (inside) break;
            spend();
            env.start = sample_start(rng, model, env.workspace, env.robot_radius);
        }
    }

    const Vec2 start_point = task_position(model, env.start);
    while (true) {
        const Vec2 g = sample_goal(rng, model, env.workspace, env.robot_radius);
        if (env.workspace.contains(g, env.robot_radius) && (g - start_point).norm() >= params.min_start_goal) {
            env.goal = g;
            break;
        }
        spend();
    }

    const bool along_path =
        params.layout == ObstacleLayout::Corridor && model.kind != SystemKind::Manipulator3;
    const double lateral = params.corridor_half_width;
    while (static_cast<int>(env.obstacles.size()) < params.num_obstacles) {
        Vec2 c;
        if (along_path) {
            const Vec2 dir = (env.goal - start_point).normalized();
            const Vec2 perp(-dir.y(), dir.x());
            c = start_point + rng.uniform(0.1, 0.9) * (env.goal - start_point) + rng.uniform(-lateral, lateral) * perp;
        } else {
            c = uniform_point(rng, env.workspace, params.obstacle_radius);
        }
        const Obstacle o{c, params.obstacle_radius};
        const bool inside = env.workspace.contains(c, params.obstacle_radius);
        const bool clear_start = clearance_to(o, model, env.start, env.robot_radius) > 0.0;
        const bool clear_goal = (env.goal - o.center).norm() > o.radius + env.robot_radius;
        if (inside && clear_start && clear_goal) {
            env.obstacles.push_back(o);
            continue;
        }
        spend();
    }
    return env;
}

double min_clearance(const Environment& env, const SystemModel& model, const State& x)
{
    require_state(model, x);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : env.obstacles) best = std::min(best, clearance_to(o, model, x, env.robot_radius));
    return best;
}

bool at_goal(const Environment& env, const SystemModel& model, const State& x, double tol)
{
    return (task_position(model, x) - env.goal).norm() <= tol;
}

std::vector<Barrier> obstacle_barriers(const Environment& env, const SystemModel& model)
{
    std::vector<Barrier> out;
    for (const auto& o : env.obstacles) {
        const double cr = o.radius + env.robot_radius;
        if (model.kind == SystemKind::Manipulator3) {
            for (int link = 0; link < 3; ++link) out.push_back(Barrier::segment(link, o.center, cr));
        } else {
            out.push_back(Barrier::circle(o.center, cr));
        }
    }
    return out;
}

std::vector<Barrier> benchmark_barriers(const Environment& env, const SystemModel& model)
{
    auto out = obstacle_barriers(env, model);
    if (model.kind == SystemKind::DoubleIntegrator) out.push_back(Barrier::velocity_bound(model.v_max));
    return out;
}

nlohmann::json to_json(const Environment& env)
{
    nlohmann::json obstacles = nlohmann::json::array();
    for (const auto& o : env.obstacles)
        obstacles.push_back({{"center", {o.center.x(), o.center.y()}}, {"radius", o.radius}});
    return {
        {"schema_version", 1},
        {"kind", std::string(to_string(env.kind))},
        {"workspace", {{"lo", {env.workspace.lo.x(), env.workspace.lo.y()}},
                       {"hi", {env.workspace.hi.x(), env.workspace.hi.y()}}}},
        {"obstacles", obstacles},
        {"start", std::vector<double>(env.start.data(), env.start.data() + env.start.size())},
        {"goal", {env.goal.x(), env.goal.y()}},
        {"robot_radius", env.robot_radius},
        {"seed", env.seed},
    };
}

Environment environment_from_json(const nlohmann::json& doc)
{
    if (doc.value("schema_version", 0) != 1) throw std::invalid_argument("unsupported environment schema_version");
    const auto vec2 = [](const nlohmann::json& j) {
        if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected a 2-vector");
        return Vec2(j[0].get<double>(), j[1].get<double>());
    };
    Environment env;
    const auto kind = parse_system_kind(doc.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown system kind in environment");
    env.kind = *kind;
    env.workspace.lo = vec2(doc.at("workspace").at("lo"));
    env.workspace.hi = vec2(doc.at("workspace").at("hi"));
    for (const auto& o : doc.at("obstacles")) env.obstacles.push_back({vec2(o.at("center")), o.at("radius").get<double>()});
    const auto start = doc.at("start").get<std::vector<double>>();
    env.start = Eigen::Map<const Vec>(start.data(), static_cast<Eigen::Index>(start.size()));
    env.goal = vec2(doc.at("goal"));
    env.robot_radius = doc.at("robot_radius").get<double>();
    env.seed = doc.at("seed").get<std::uint64_t>();
    return env;
}

}  // namespace cbfw
