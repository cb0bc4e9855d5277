#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfw/barriers.hpp"

namespace cbfw {

struct GridAxis {
    double min = 0.0;
    double max = 1.0;
    int count = 2;

    double at(int i) const { return min + (max - min) * static_cast<double>(i) / (count - 1); }
};

/// Tensor grid over the state space. The last axis varies fastest.
struct DomainGrid {
    std::vector<GridAxis> axes;
    std::size_t cap = 10'000'000;

    std::size_t size() const;
    State point(std::size_t index) const;
    /// Throws GridSizeError past the cap, ContractViolation on malformed axes.
    void validate() const;
};

class GridSizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Benchmark scan grid of a model: 201^2 workspace for the single integrator,
/// 41^4 position/velocity for the double integrator, 61^3 joint grid for the arm.
DomainGrid default_grid(const SystemModel& model);

/// First-order test with gamma, or the linear HOCBF chain when gamma2 is set.
struct CertifyGains {
    double gamma = 1.0;
    std::optional<double> gamma2;
};

struct Violation {
    State x;
    double margin = 0.0;
};

struct FeasibilityReport {
    std::size_t grid_points = 0;
    std::size_t total_points = 0;  // points actually evaluated
    std::vector<Violation> violations;
    double min_margin = 0.0;  // +inf when nothing was evaluated
    State worst_state;
};

/**
 * sup_{u in box} of the CBF inequality residual at x.
 *
 * First order: Lf_h + sum_i |Lg_h_i| box_i + gamma h. With gamma2 the HOCBF
 * residual LgLf_h u + Lf2_h + (gamma1 + gamma2) hdot + gamma1 gamma2 h is used.
 * Nonnegative iff the admissible input set at x is nonempty.
 */
double pointwise_margin(const SystemModel& model, const Barrier& b, const CertifyGains& gains, const State& x);

FeasibilityReport scan_domain(const SystemModel& model, const Barrier& b, const CertifyGains& gains,
                              const DomainGrid& grid, bool restrict_to_safe, int jobs = 1);

/// min of Lf_h over grid points with h >= 0; +inf if there are none.
double passive_safety_margin(const SystemModel& model, const Barrier& b, const DomainGrid& grid);

/// 1D double integrator against the wall p >= 0: v >= -sqrt(2 u_max p).
bool in_viability_kernel(double p, double v, double u_max);

/// Brute-force check of the same property: brake at +u_max from (p, v) with
/// explicit Euler steps and report whether p stays nonnegative.
bool kernel_oracle_check(double p, double v, double u_max, double dt, double horizon);

nlohmann::json to_json(const FeasibilityReport& report, std::size_t violation_cap = 100);

}  // namespace cbfw
