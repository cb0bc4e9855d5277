#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfw/barriers.hpp"

namespace cbfw {

/// Penetration depth (m) below which contact is not counted as a collision.
/// A filter that holds h at 0 leaves roundoff of order 1e-15, and on the arm
/// the explicit-Euler step over a barrier that is nonconvex in joint space
/// overshoots by O(dt^2 |u|^2) of the link length, a few 1e-4 m at dt = 0.01.
inline constexpr double kContactTolerance = 1e-3;

inline bool is_collision(double clearance) { return clearance < -kContactTolerance; }

struct Obstacle {
    Vec2 center = Vec2::Zero();
    double radius = 0.4;
};

struct Workspace {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{10.0, 10.0};

    bool contains(const Vec2& p, double inset = 0.0) const;
};

/// Benchmark layout. Immutable once sampled.
struct Environment {
    SystemKind kind = SystemKind::SingleIntegrator;
    Workspace workspace;
    std::vector<Obstacle> obstacles;
    State start;
    Vec2 goal = Vec2::Zero();
    double robot_radius = 0.25;  // disk robot; also the capsule radius of each arm link
    std::uint64_t seed = 0;
};

/// Uniform scatters obstacles over the whole field. Corridor draws them near
/// the start-goal segment so that most trials actually meet an obstacle; it
/// applies to point robots only (the arm always uses the uniform layout).
enum class ObstacleLayout { Uniform, Corridor };

std::string_view to_string(ObstacleLayout layout);
ObstacleLayout parse_obstacle_layout(std::string_view name);

struct WorldParams {
    ObstacleLayout layout = ObstacleLayout::Corridor;
    double corridor_half_width = 1.0;
    int num_obstacles = 10;
    double obstacle_radius = 0.4;
    double robot_radius = 0.25;
    double min_start_goal = 1.0;
    int max_attempts = 10000;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic in (seed, model, params); rejection-samples until the start
/// is collision-free, the goal disk is free and the goal is far enough away.
Environment sample_environment(std::uint64_t seed, const SystemModel& model, const WorldParams& params = {});

/// Smallest (distance - combined radius) over obstacles (and links for the
/// arm). Negative means collision; +infinity with no obstacles.
double min_clearance(const Environment& env, const SystemModel& model, const State& x);

/// Closed test: ||task position - goal|| <= tol.
bool at_goal(const Environment& env, const SystemModel& model, const State& x, double tol);

/// One barrier per obstacle (per link and obstacle for the arm).
std::vector<Barrier> obstacle_barriers(const Environment& env, const SystemModel& model);

/// Obstacle barriers plus, for the double integrator, the speed envelope.
std::vector<Barrier> benchmark_barriers(const Environment& env, const SystemModel& model);

/// Versioned JSON document ("schema_version": 1).
nlohmann::json to_json(const Environment& env);
Environment environment_from_json(const nlohmann::json& doc);

}  // namespace cbfw
